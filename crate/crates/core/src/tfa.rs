//! Fixed-point total-flow analysis.
//!
//! Each sweep visits vertices in class order. At a vertex, every flow's input
//! curve (source curve or sum of parent outputs) passes through the vertex's
//! function pipeline, then the aggregate of all flows meets the vertex's
//! service curve. Per-flow output curves are the pipeline outputs shifted by
//! the vertex jitter. Feed-forward networks need one sweep; cyclic ones repeat
//! until nothing changes, starting from source curves everywhere.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::minplus::{h_dev, Bound, ConcaveCurve};
use crate::rational::Rational;
use crate::redundancy::{lossy_jitter_output_curve, pef_output_curve, pef_rto_bound, pof_output_curve, rbo_from_rto};
use crate::regulators::{
    check_shaping, ir_after_pef_verdict, pfr_after_pef_rto, preof_for_free_bounds, IrContext, ReasonCode,
    RegulatorVerdict,
};
use crate::topology::{
    DelayInterval, FlowIdx, Function, Network, PathDelayBounds, Placement, RegulatorMode, Vertex, VertexId,
};

pub const DEFAULT_ITERATION_CAP: usize = 1000;

/// Burst cap above which a cyclic iteration is declared divergent.
pub fn default_burst_cap() -> Rational {
    Rational::from_integer(1_000_000_000)
}

/// How a PEF output curve is computed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PefModel {
    /// Input curve convolved with every diamond ancestor's shifted curve.
    Tight,
    /// Sum of the incoming branch curves, as if nothing were eliminated.
    Intuitive,
}

impl fmt::Display for PefModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PefModel::Tight => "tight",
            PefModel::Intuitive => "intuitive",
        })
    }
}

impl FromStr for PefModel {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "tight" => Ok(PefModel::Tight),
            "intuitive" => Ok(PefModel::Intuitive),
            other => Err(format!("unknown model {other:?}; expected tight or intuitive")),
        }
    }
}

/// Loss assumption for ordering functions. `Unspecified` computes with the
/// lossy formulas and reports both POF curves.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossModel {
    Lossless,
    Lossy,
    Unspecified,
}

#[derive(Clone, Debug)]
pub struct AnalysisConfig {
    pub model: PefModel,
    pub loss: LossModel,
    pub iteration_cap: usize,
    pub burst_cap: Rational,
}

impl AnalysisConfig {
    pub fn new(model: PefModel, loss: LossModel) -> Self {
        AnalysisConfig { model, loss, iteration_cap: DEFAULT_ITERATION_CAP, burst_cap: default_burst_cap() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConvergenceStatus {
    Converged,
    /// Rate overload at some vertex, or a burst above the cap.
    Diverged,
    IterationCap,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Convergence {
    pub status: ConvergenceStatus,
    pub iterations: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub overloaded: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DeadlineVerdict {
    Met,
    Violated,
    None,
}

impl DeadlineVerdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            DeadlineVerdict::Met => "met",
            DeadlineVerdict::Violated => "violated",
            DeadlineVerdict::None => "none",
        }
    }
}

/// End-to-end interval from the input of the source vertex to the output of
/// one destination vertex.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowRow {
    pub flow: String,
    pub destination: String,
    pub model: PefModel,
    pub interval: DelayInterval,
    pub deadline: Option<Rational>,
    pub verdict: DeadlineVerdict,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AncestorReordering {
    pub ancestor: String,
    /// Delay bounds from the ancestor output to the PEF input; `None` when unbounded.
    pub bounds: Option<PathDelayBounds>,
    pub rto: Bound,
    pub rbo: Bound,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PefReport {
    pub vertex: String,
    pub flow: String,
    /// `None` stands for "no finite arrival curve".
    pub tight: Option<ConcaveCurve>,
    pub intuitive: Option<ConcaveCurve>,
    pub reordering: Vec<AncestorReordering>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PofReport {
    pub vertex: String,
    pub flow: String,
    pub reference: String,
    pub timeout: Option<Rational>,
    pub bounds: Option<PathDelayBounds>,
    pub lossless_curve: Option<ConcaveCurve>,
    pub lossy_curve: Option<ConcaveCurve>,
    /// RTO bound relative to the reference: the smallest safe timeout.
    pub timeout_required: Bound,
    /// RBO bound: the buffer needed to hold out-of-order data.
    pub buffer: Bound,
    pub timeout_sufficient: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegReport {
    pub vertex: String,
    pub flow: String,
    pub reference: String,
    pub mode: RegulatorMode,
    pub shaping: ConcaveCurve,
    pub verdict: RegulatorVerdict,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VertexReport {
    pub vertex: String,
    pub delay: DelayInterval,
    pub aggregate: Option<ConcaveCurve>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub model: PefModel,
    pub loss_model: LossModel,
    pub convergence: Convergence,
    pub flows: Vec<FlowRow>,
    pub pefs: Vec<PefReport>,
    pub pofs: Vec<PofReport>,
    pub regulators: Vec<RegReport>,
    pub vertices: Vec<VertexReport>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

pub const CSV_HEADER: &str = "flow,destination,model,lower,upper,deadline,verdict";

impl AnalysisReport {
    pub fn flow_row(&self, flow: &str, destination: &str) -> Option<&FlowRow> {
        self.flows.iter().find(|r| r.flow == flow && r.destination == destination)
    }

    pub fn pef(&self, vertex: &str, flow: &str) -> Option<&PefReport> {
        self.pefs.iter().find(|r| r.vertex == vertex && r.flow == flow)
    }

    pub fn pof(&self, vertex: &str, flow: &str) -> Option<&PofReport> {
        self.pofs.iter().find(|r| r.vertex == vertex && r.flow == flow)
    }

    pub fn regulator(&self, vertex: &str, flow: &str) -> Option<&RegReport> {
        self.regulators.iter().find(|r| r.vertex == vertex && r.flow == flow)
    }

    pub fn vertex(&self, vertex: &str) -> Option<&VertexReport> {
        self.vertices.iter().find(|r| r.vertex == vertex)
    }

    pub fn any_deadline_violated(&self) -> bool {
        self.flows.iter().any(|r| r.verdict == DeadlineVerdict::Violated)
    }

    /// True when some bound is infinite or the iteration did not converge.
    pub fn any_unbounded(&self) -> bool {
        self.convergence.status != ConvergenceStatus::Converged
            || self.flows.iter().any(|r| !r.interval.upper.is_finite())
            || self.regulators.iter().any(|r| r.verdict.reason().is_some())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.flows {
            let deadline = r.deadline.as_ref().map(Rational::to_string).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                csv_field(&r.flow),
                csv_field(&r.destination),
                r.model,
                r.interval.lower,
                r.interval.upper,
                deadline,
                r.verdict.as_str()
            ));
        }
        out
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Delay interval of a vertex serving `aggregate`: technological latency plus
/// the horizontal deviation against the service curve. `None` means the
/// aggregate has no finite curve.
pub fn vertex_delay(vertex: &Vertex, aggregate: Option<&ConcaveCurve>) -> DelayInterval {
    let tech = &vertex.tech_latency;
    let Some(alpha) = aggregate else {
        return DelayInterval::new(tech.lower.clone(), Bound::Unbounded);
    };
    let h = match &vertex.service {
        None => Bound::zero(),
        Some(beta) => h_dev(alpha, beta),
    };
    DelayInterval::new(tech.lower.clone(), h.plus_finite(&tech.upper))
}

fn sum_curves<'c>(curves: impl IntoIterator<Item = &'c Option<ConcaveCurve>>) -> Option<ConcaveCurve> {
    let mut acc = ConcaveCurve::zero();
    for c in curves {
        acc = acc.add(c.as_ref()?);
    }
    Some(acc)
}

fn stage(p: &Placement) -> u8 {
    match p.function {
        Function::Pef => 0,
        Function::Pof { .. } => 1,
        Function::Reg { .. } => 2,
    }
}

#[derive(Clone, Debug, Default)]
struct SiteRecords {
    pefs: Vec<PefReport>,
    pofs: Vec<PofReport>,
    regs: Vec<RegReport>,
}

/// Mutable state of one analysis run. `sweep` performs one pass; `run`
/// iterates to the fixed point.
#[derive(Clone)]
pub struct AnalysisState<'n> {
    net: &'n Network,
    config: AnalysisConfig,
    order: Vec<VertexId>,
    acyclic: bool,
    out: BTreeMap<(FlowIdx, VertexId), Option<ConcaveCurve>>,
    hop: BTreeMap<VertexId, DelayInterval>,
    extra: BTreeMap<(FlowIdx, VertexId), DelayInterval>,
    aggregate: BTreeMap<VertexId, Option<ConcaveCurve>>,
    records: SiteRecords,
    overloaded: BTreeSet<VertexId>,
    iterations: usize,
    status: Option<ConvergenceStatus>,
    warnings: Vec<String>,
    /// Delay intervals held fixed while evaluating the map for extrapolation.
    frozen: Option<Frozen>,
}

type Frozen = (BTreeMap<VertexId, DelayInterval>, BTreeMap<(FlowIdx, VertexId), DelayInterval>);

/// A coordinate of the fixed-point variable: an upper delay bound.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Var {
    Hop(VertexId),
    Extra(FlowIdx, VertexId),
}

impl<'n> AnalysisState<'n> {
    pub fn new(net: &'n Network, config: AnalysisConfig) -> Self {
        let (order, acyclic) = net.sweep_order();
        let mut out = BTreeMap::new();
        let mut extra = BTreeMap::new();
        for (f, flow) in net.flows().iter().enumerate() {
            for &v in flow.dag.order() {
                out.insert((f, v), Some(flow.arrival.clone()));
                extra.insert((f, v), DelayInterval::zero());
            }
        }
        let hop = (0..net.vertices().len()).map(|v| (v, net.vertices()[v].tech_latency.to_interval())).collect();
        let mut warnings = Vec::new();
        if config.loss == LossModel::Lossless && net.edges().iter().any(|e| e.lossy) {
            warnings.push("lossless analysis requested but some edges are marked lossy".to_string());
        }
        AnalysisState {
            net,
            config,
            order,
            acyclic,
            out,
            hop,
            extra,
            aggregate: BTreeMap::new(),
            records: SiteRecords::default(),
            overloaded: BTreeSet::new(),
            iterations: 0,
            status: None,
            warnings,
            frozen: None,
        }
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn status(&self) -> Option<ConvergenceStatus> {
        self.status
    }

    pub fn is_feed_forward(&self) -> bool {
        self.acyclic
    }

    /// Arrival curve of flow `f` at the output of `v`; `None` when unbounded
    /// or when `f` does not cross `v`.
    pub fn curve(&self, f: FlowIdx, v: VertexId) -> Option<&ConcaveCurve> {
        self.out.get(&(f, v)).and_then(Option::as_ref)
    }

    pub fn curves(&self) -> &BTreeMap<(FlowIdx, VertexId), Option<ConcaveCurve>> {
        &self.out
    }

    pub fn vertex_delay(&self, v: VertexId) -> &DelayInterval {
        &self.hop[&v]
    }

    /// Per-vertex interval seen by flow `f`: pipeline extras plus vertex delay.
    fn per_hop(&self, f: FlowIdx) -> BTreeMap<VertexId, DelayInterval> {
        let (hop, extra) = match &self.frozen {
            Some((h, e)) => (h, e),
            None => (&self.hop, &self.extra),
        };
        self.net.flows()[f].dag.order().iter().map(|&v| (v, extra[&(f, v)].plus(&hop[&v]))).collect()
    }

    fn bounds(
        &self,
        f: FlowIdx,
        a: VertexId,
        n: VertexId,
        per_hop: &BTreeMap<VertexId, DelayInterval>,
    ) -> Option<PathDelayBounds> {
        self.net.path_delay_bounds(f, a, n, per_hop).ok()?.as_path_bounds()
    }

    fn name(&self, v: VertexId) -> String {
        self.net.vertex_name(v).to_string()
    }

    /// One pass over all vertices. Returns whether any curve or interval changed.
    pub fn sweep(&mut self) -> bool {
        let before = (self.out.clone(), self.hop.clone(), self.extra.clone());
        self.records = SiteRecords::default();
        self.overloaded.clear();
        for i in 0..self.order.len() {
            let n = self.order[i];
            self.visit(n);
        }
        self.iterations += 1;
        before != (self.out.clone(), self.hop.clone(), self.extra.clone())
    }

    fn burst_capped(&self) -> bool {
        self.out.values().flatten().any(|c| c.segments().last().is_some_and(|s| s.burst > self.config.burst_cap))
    }

    /// Iterates to the fixed point, the iteration cap, or divergence.
    pub fn run(&mut self) -> ConvergenceStatus {
        let status = loop {
            let changed = self.sweep();
            if !self.overloaded.is_empty() || self.burst_capped() {
                break ConvergenceStatus::Diverged;
            }
            if self.acyclic || !changed {
                break ConvergenceStatus::Converged;
            }
            if self.iterations >= 2 && self.extrapolate() {
                self.sweep();
                break ConvergenceStatus::Converged;
            }
            if self.iterations >= self.config.iteration_cap {
                break ConvergenceStatus::IterationCap;
            }
        };
        self.status = Some(status);
        status
    }

    fn variables(&self) -> Option<Vec<(Var, Rational)>> {
        let hops = self.hop.iter().map(|(&v, d)| (Var::Hop(v), d));
        let extras = self.extra.iter().map(|(&(f, v), d)| (Var::Extra(f, v), d));
        hops.chain(extras).map(|(k, d)| d.upper.finite().map(|u| (k, u.clone()))).collect()
    }

    fn set_variables(&mut self, x: &[(Var, Rational)]) {
        for (k, u) in x {
            let slot = match k {
                Var::Hop(v) => self.hop.get_mut(v),
                Var::Extra(f, v) => self.extra.get_mut(&(*f, *v)),
            }
            .expect("known variable");
            slot.upper = Bound::Finite(u.clone());
        }
    }

    /// Evaluates the delay map with all delay bounds held at `x`: curves are
    /// propagated along each flow graph until stable, then vertex delays and
    /// pipeline extras are recomputed.
    fn evaluate_frozen(&self, x: &[(Var, Rational)]) -> Option<(Self, Vec<Rational>)> {
        let mut trial = self.clone();
        trial.set_variables(x);
        trial.frozen = Some((trial.hop.clone(), trial.extra.clone()));
        for _ in 0..=self.net.vertices().len() + 1 {
            let before = trial.out.clone();
            trial.records = SiteRecords::default();
            trial.overloaded.clear();
            for i in 0..trial.order.len() {
                let n = trial.order[i];
                trial.visit(n);
            }
            if before == trial.out {
                break;
            }
        }
        trial.frozen = None;
        let y = trial.variables()?;
        Some((trial, y.into_iter().map(|(_, u)| u).collect()))
    }

    /// Tries to jump to the exact fixed point: linearizes the delay map at
    /// the current point by finite differences, solves `x = Mx + c` exactly,
    /// and accepts the solution only if it is a fixed point of the map and
    /// lies above the current iterate.
    fn extrapolate(&mut self) -> bool {
        let Some(x0) = self.variables() else { return false };
        let Some((_, f0)) = self.evaluate_frozen(&x0) else { return false };
        let n = x0.len();
        let step = |u: &Rational| {
            let tiny = Rational::new(1, 1 << 20);
            if u.is_positive() {
                u * &tiny
            } else {
                &tiny * &tiny
            }
        };
        // Columns of M.
        let mut m = vec![vec![Rational::zero(); n]; n];
        for i in 0..n {
            let h = step(&x0[i].1);
            let mut xi = x0.clone();
            xi[i].1 = &xi[i].1 + &h;
            let Some((_, fi)) = self.evaluate_frozen(&xi) else { return false };
            for r in 0..n {
                m[r][i] = (&fi[r] - &f0[r]) / &h;
            }
        }
        // (I − M) x = f0 − M x0.
        let mut a = vec![vec![Rational::zero(); n]; n];
        let mut b = vec![Rational::zero(); n];
        for r in 0..n {
            let mut c = f0[r].clone();
            for k in 0..n {
                c -= &(&m[r][k] * &x0[k].1);
                a[r][k] = if r == k { Rational::one() - &m[r][k] } else { -&m[r][k] };
            }
            b[r] = c;
        }
        let Some(sol) = solve_linear(a, b) else { return false };
        if sol.iter().zip(&x0).any(|(s, (_, x))| s < x) {
            return false;
        }
        let xs: Vec<(Var, Rational)> = x0.iter().map(|(k, _)| *k).zip(sol.iter().cloned()).collect();
        match self.evaluate_frozen(&xs) {
            Some((trial, y)) if y == sol => {
                let iterations = self.iterations;
                *self = trial;
                self.iterations = iterations;
                true
            }
            _ => false,
        }
    }

    fn visit(&mut self, n: VertexId) {
        let net = self.net;
        let mut pipeline: Vec<(usize, &Placement)> =
            net.placements().iter().enumerate().filter(|(_, p)| p.vertex == n).collect();
        pipeline.sort_by_key(|(_, p)| stage(p));
        let mut ir_verdicts: BTreeMap<usize, RegulatorVerdict> = BTreeMap::new();
        let mut local = Vec::new();
        for f in net.flows_at(n) {
            let flow = &net.flows()[f];
            let mut c = if n == flow.source {
                Some(flow.arrival.clone())
            } else {
                sum_curves(flow.dag.parents(n).iter().map(|p| &self.out[&(f, *p)]))
            };
            let mut e = DelayInterval::zero();
            let per_hop = self.per_hop(f);
            for &(pi, p) in pipeline.iter().filter(|(_, p)| p.flows.contains(&f)) {
                match &p.function {
                    Function::Pef => c = self.apply_pef(f, n, c, &per_hop),
                    Function::Pof { reference, timeout } => {
                        let (nc, ne) = self.apply_pof(f, n, *reference, timeout.as_ref(), c, &per_hop);
                        c = nc;
                        e = e.plus(&ne);
                    }
                    Function::Reg { mode, reference, shaping } => {
                        let ctx = RegSite { index: pi, placement: p, mode: *mode, reference: *reference, shaping };
                        let (nc, ne) = self.apply_reg(f, n, &ctx, &pipeline, c, &e, &per_hop, &mut ir_verdicts);
                        c = nc;
                        e = e.plus(&ne);
                    }
                }
            }
            self.extra.insert((f, n), e);
            local.push((f, c));
        }
        let aggregate = sum_curves(local.iter().map(|(_, c)| c));
        let delay = vertex_delay(&net.vertices()[n], aggregate.as_ref());
        if aggregate.is_some() && !delay.upper.is_finite() {
            self.overloaded.insert(n);
        }
        let jitter = match &self.frozen {
            Some((hop, _)) => hop[&n].as_path_bounds(),
            None => delay.as_path_bounds(),
        };
        for (f, c) in local {
            let out = match (&c, &jitter) {
                (Some(c), Some(j)) => Some(lossy_jitter_output_curve(c, j)),
                _ => None,
            };
            self.out.insert((f, n), out);
        }
        self.aggregate.insert(n, aggregate);
        self.hop.insert(n, delay);
    }

    fn apply_pef(
        &mut self,
        f: FlowIdx,
        n: VertexId,
        c_in: Option<ConcaveCurve>,
        per_hop: &BTreeMap<VertexId, DelayInterval>,
    ) -> Option<ConcaveCurve> {
        let flow = &self.net.flows()[f];
        let mut ancestors = Vec::new();
        let mut reordering = Vec::new();
        for a in self.net.diamond_ancestors(f, n) {
            if a == n {
                continue;
            }
            let bounds = self.bounds(f, a, n, per_hop);
            let rto = match (self.curve(f, a), &bounds) {
                (Some(alpha_a), Some(b)) => {
                    ancestors.push((alpha_a.clone(), b.clone()));
                    Bound::Finite(pef_rto_bound(alpha_a, b, &flow.l_min))
                }
                _ => Bound::Unbounded,
            };
            reordering.push(AncestorReordering { ancestor: self.name(a), bounds, rto, rbo: Bound::Unbounded });
        }
        let tight = match &c_in {
            Some(c) => Some(pef_output_curve(c, &ancestors)),
            None => ancestors.iter().map(|(a, b)| lossy_jitter_output_curve(a, b)).reduce(|x, y| x.convolve(&y)),
        };
        let used = match self.config.model {
            PefModel::Tight => tight.clone(),
            PefModel::Intuitive => c_in.clone(),
        };
        for r in &mut reordering {
            r.rbo = match &used {
                Some(alpha) => rbo_from_rto(alpha, &r.rto),
                None => Bound::Unbounded,
            };
        }
        self.records.pefs.push(PefReport {
            vertex: self.name(n),
            flow: flow.id.clone(),
            tight,
            intuitive: c_in,
            reordering,
        });
        used
    }

    fn lossless(&self) -> bool {
        self.config.loss == LossModel::Lossless
    }

    fn apply_pof(
        &mut self,
        f: FlowIdx,
        n: VertexId,
        reference: VertexId,
        timeout: Option<&Rational>,
        c_in: Option<ConcaveCurve>,
        per_hop: &BTreeMap<VertexId, DelayInterval>,
    ) -> (Option<ConcaveCurve>, DelayInterval) {
        let flow = &self.net.flows()[f];
        let bounds = self.bounds(f, reference, n, per_hop);
        let alpha_ref = self.curve(f, reference).cloned();
        let (lossless_curve, lossy_curve, rto) = match (&alpha_ref, &bounds) {
            (Some(a), Some(b)) => (
                pof_output_curve(a, b, timeout, true),
                pof_output_curve(a, b, timeout, false),
                Bound::Finite(pef_rto_bound(a, b, &flow.l_min)),
            ),
            _ => (None, None, Bound::Unbounded),
        };
        let buffer = match &c_in {
            Some(c) => rbo_from_rto(c, &rto),
            None => Bound::Unbounded,
        };
        let timeout_sufficient = match (timeout, rto.finite()) {
            (Some(t), Some(r)) => Some(t >= r),
            _ => None,
        };
        let (out, extra) = if self.lossless() {
            (lossless_curve.clone(), DelayInterval::zero())
        } else {
            let upper = timeout.map_or(Bound::Unbounded, |t| Bound::Finite(t.clone()));
            (lossy_curve.clone(), DelayInterval::new(Rational::zero(), upper))
        };
        self.records.pofs.push(PofReport {
            vertex: self.name(n),
            flow: flow.id.clone(),
            reference: self.name(reference),
            timeout: timeout.cloned(),
            bounds,
            lossless_curve,
            lossy_curve,
            timeout_required: rto,
            buffer,
            timeout_sufficient,
        });
        (out, extra)
    }

    #[allow(clippy::too_many_arguments)]
    fn apply_reg(
        &mut self,
        f: FlowIdx,
        n: VertexId,
        site: &RegSite<'_>,
        pipeline: &[(usize, &Placement)],
        c_in: Option<ConcaveCurve>,
        extra_so_far: &DelayInterval,
        per_hop: &BTreeMap<VertexId, DelayInterval>,
        ir_verdicts: &mut BTreeMap<usize, RegulatorVerdict>,
    ) -> (Option<ConcaveCurve>, DelayInterval) {
        let net = self.net;
        let flow = &net.flows()[f];
        let o = site.reference;
        let sigma = site.shaping[&f].clone();
        let upstream =
            net.path_delay_bounds(f, o, n, per_hop).ok().map(|b| b.plus(extra_so_far)).and_then(|b| b.as_path_bounds());
        let interleaved = site.mode == RegulatorMode::Interleaved && site.placement.flows.len() >= 2;
        let output = if interleaved {
            Some(sigma.clone())
        } else {
            Some(c_in.as_ref().map_or(sigma.clone(), |c| c.convolve(&sigma)))
        };

        let shaping_problem = match self.curve(f, o) {
            None => Some("no finite arrival curve at the reference".to_string()),
            Some(alpha_o) => check_shaping(&sigma, alpha_o).err().map(|e| e.to_string()),
        };
        let preof = pipeline.iter().find_map(|(_, p)| match &p.function {
            Function::Pof { reference, timeout }
                if *reference == o && site.placement.flows.iter().all(|g| p.flows.contains(g)) =>
            {
                Some(timeout.clone())
            }
            _ => None,
        });
        let mut verdict = if let Some(problem) = shaping_problem {
            RegulatorVerdict::unbounded(ReasonCode::UnprovenConfiguration, problem)
        } else if let Some(timeout) = preof {
            // The POF already charged its timeout; the regulator adds nothing.
            let interval = match net.path_delay_bounds(f, o, n, per_hop).ok().and_then(|b| b.as_path_bounds()) {
                Some(b) => preof_for_free_bounds(&b, timeout.as_ref(), self.lossless()),
                None => DelayInterval::new(Rational::zero(), Bound::Unbounded),
            };
            let mut v = RegulatorVerdict::bounded(interval);
            v.rto_bound = Some(Rational::zero());
            v
        } else if !interleaved {
            self.pfr_verdict(f, n, o, &sigma, c_in.as_ref(), upstream.as_ref(), per_hop)
        } else {
            ir_verdicts.entry(site.index).or_insert_with(|| self.ir_verdict(n, site, per_hop)).clone()
        };
        let extra = match (verdict.interval(), &upstream) {
            (Some(iv), Some(u)) => DelayInterval::new(
                Rational::zero(),
                match &iv.upper {
                    Bound::Finite(x) => Bound::Finite((x - &u.upper).positive_part()),
                    Bound::Unbounded => Bound::Unbounded,
                },
            ),
            (Some(_), None) => DelayInterval::zero(),
            (None, _) => DelayInterval::new(Rational::zero(), Bound::Unbounded),
        };
        if verdict.detail.is_none() && verdict.interval().is_some_and(|iv| !iv.upper.is_finite()) {
            verdict.detail = Some("upstream delay is unbounded".to_string());
        }
        self.records.regs.push(RegReport {
            vertex: self.name(n),
            flow: flow.id.clone(),
            reference: self.name(o),
            mode: site.mode,
            shaping: sigma,
            verdict,
        });
        (output, extra)
    }

    #[allow(clippy::too_many_arguments)]
    fn pfr_verdict(
        &self,
        f: FlowIdx,
        n: VertexId,
        o: VertexId,
        sigma: &ConcaveCurve,
        c_in: Option<&ConcaveCurve>,
        upstream: Option<&PathDelayBounds>,
        per_hop: &BTreeMap<VertexId, DelayInterval>,
    ) -> RegulatorVerdict {
        let flow = &self.net.flows()[f];
        let Some(up) = upstream else {
            return RegulatorVerdict::bounded(DelayInterval::new(Rational::zero(), Bound::Unbounded));
        };
        if flow.dag.paths(o, n, 2).len() == 1 {
            // One FIFO path from the reference: shaping is for free.
            let mut v = RegulatorVerdict::bounded(up.to_interval());
            v.rto_bound = Some(Rational::zero());
            return v;
        }
        let h = c_in.map_or(Bound::Unbounded, |c| h_dev(c, &sigma.clone().into()));
        let penalty = match sigma.as_token_bucket() {
            Some(_) => h.min(Bound::Finite(up.jitter())),
            None => h,
        };
        let Bound::Finite(penalty) = penalty else {
            return RegulatorVerdict::unbounded(
                ReasonCode::RateOverload,
                "regulator input rate exceeds the long-term rate of its shaping curve",
            );
        };
        let mut v = RegulatorVerdict::bounded(DelayInterval::finite(up.lower.clone(), &up.upper + penalty));
        if self.net.has_pef(f, n) {
            let rto =
                self.curve(f, o).zip(self.bounds(f, o, n, per_hop)).map(|(a, b)| pef_rto_bound(a, &b, &flow.l_min));
            v.rto_bound = rto.map(|r| pfr_after_pef_rto(&r, up));
        }
        v
    }

    fn ir_verdict(
        &self,
        n: VertexId,
        site: &RegSite<'_>,
        per_hop_first: &BTreeMap<VertexId, DelayInterval>,
    ) -> RegulatorVerdict {
        let net = self.net;
        let flows = &site.placement.flows;
        let o = site.reference;
        const PATH_LIMIT: usize = 64;
        let path_sets: Vec<BTreeSet<Vec<VertexId>>> =
            flows.iter().map(|&g| net.flows()[g].dag.paths(o, n, PATH_LIMIT).into_iter().collect()).collect();
        let shared: BTreeSet<Vec<VertexId>> =
            path_sets.iter().skip(1).fold(path_sets[0].clone(), |acc, s| acc.intersection(s).cloned().collect());
        let all_pef = flows.iter().all(|&g| net.has_pef(g, n));
        if all_pef {
            let per_hop = self.per_hop(flows[0]);
            let branches: Option<Vec<PathDelayBounds>> =
                shared.iter().map(|path| explicit_path_bounds(path, &per_hop)).collect();
            let Some(shared_branches) = branches else {
                return RegulatorVerdict::unbounded(ReasonCode::UnprovenConfiguration, "upstream delay is unbounded");
            };
            let upstream = net
                .path_delay_bounds(flows[0], o, n, per_hop_first)
                .ok()
                .and_then(|b| b.as_path_bounds())
                .unwrap_or_else(|| PathDelayBounds::constant(Rational::zero()));
            let ctx = IrContext {
                shaping: flows.iter().map(|g| site.shaping[g].clone()).collect(),
                l_min: flows.iter().map(|&g| net.flows()[g].l_min.clone()).min().expect("nonempty"),
                shared_branches,
                upstream,
                alpha_in: None,
            };
            return ir_after_pef_verdict(&ctx);
        }
        let single_shared_path = path_sets.iter().all(|s| s.len() == 1) && shared.len() == 1;
        if single_shared_path {
            let path = shared.iter().next().expect("one path");
            let per_hop = self.per_hop(flows[0]);
            return match explicit_path_bounds(path, &per_hop) {
                Some(b) => {
                    let mut v = RegulatorVerdict::bounded(b.to_interval());
                    v.rto_bound = Some(Rational::zero());
                    v
                }
                None => RegulatorVerdict::bounded(DelayInterval::new(Rational::zero(), Bound::Unbounded)),
            };
        }
        RegulatorVerdict::unbounded(
            ReasonCode::UnprovenConfiguration,
            "interleaved regulator whose upstream is not FIFO for the aggregate",
        )
    }

    pub fn report(&self) -> AnalysisReport {
        let net = self.net;
        let mut flows = Vec::new();
        for (f, flow) in net.flows().iter().enumerate() {
            let per_hop = self.per_hop(f);
            let mut best: BTreeMap<VertexId, DelayInterval> = BTreeMap::new();
            for &v in flow.dag.order() {
                let arrived = if v == flow.source {
                    DelayInterval::zero()
                } else {
                    let parents = flow.dag.parents(v);
                    let lower = parents.iter().map(|p| best[p].lower.clone()).min().expect("non-source has parents");
                    let upper = parents.iter().map(|p| best[p].upper.clone()).max().expect("same");
                    DelayInterval::new(lower, upper)
                };
                best.insert(v, arrived.plus(&per_hop[&v]));
            }
            for &d in &flow.destinations {
                let interval = best[&d].clone();
                let deadline = flow.deadlines.get(&d).cloned();
                let verdict = match (&deadline, &interval.upper) {
                    (None, _) => DeadlineVerdict::None,
                    (Some(dl), Bound::Finite(u)) if u <= dl => DeadlineVerdict::Met,
                    _ => DeadlineVerdict::Violated,
                };
                flows.push(FlowRow {
                    flow: flow.id.clone(),
                    destination: self.name(d),
                    model: self.config.model,
                    interval,
                    deadline,
                    verdict,
                });
            }
        }
        let vertices = (0..net.vertices().len())
            .map(|v| VertexReport {
                vertex: self.name(v),
                delay: self.hop[&v].clone(),
                aggregate: self.aggregate.get(&v).cloned().flatten(),
            })
            .collect();
        AnalysisReport {
            model: self.config.model,
            loss_model: self.config.loss,
            convergence: Convergence {
                status: self.status.unwrap_or(ConvergenceStatus::IterationCap),
                iterations: self.iterations,
                overloaded: self.overloaded.iter().map(|&v| self.name(v)).collect(),
            },
            flows,
            pefs: self.records.pefs.clone(),
            pofs: self.records.pofs.clone(),
            regulators: self.records.regs.clone(),
            vertices,
            warnings: self.warnings.clone(),
        }
    }
}

struct RegSite<'p> {
    index: usize,
    placement: &'p Placement,
    mode: RegulatorMode,
    reference: VertexId,
    shaping: &'p BTreeMap<FlowIdx, ConcaveCurve>,
}

/// Exact Gaussian elimination; `None` when singular.
fn solve_linear(mut a: Vec<Vec<Rational>>, mut b: Vec<Rational>) -> Option<Vec<Rational>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).find(|&r| !a[r][col].is_zero())?;
        a.swap(col, pivot);
        b.swap(col, pivot);
        for r in 0..n {
            if r != col && !a[r][col].is_zero() {
                let factor = &a[r][col] / &a[col][col];
                let pivot_row = a[col].clone();
                for (x, p) in a[r].iter_mut().zip(&pivot_row).skip(col) {
                    *x -= &(&factor * p);
                }
                let delta = &factor * &b[col];
                b[r] -= &delta;
            }
        }
    }
    Some((0..n).map(|i| &b[i] / &a[i][i]).collect())
}

/// Bounds along one explicit path, summing the vertices strictly inside it.
fn explicit_path_bounds(path: &[VertexId], per_hop: &BTreeMap<VertexId, DelayInterval>) -> Option<PathDelayBounds> {
    let inner = &path[1..path.len().saturating_sub(1)];
    inner.iter().try_fold(DelayInterval::zero(), |acc, v| Some(acc.plus(per_hop.get(v)?)))?.as_path_bounds()
}

pub fn analyze_with(net: &Network, config: AnalysisConfig) -> AnalysisReport {
    let mut state = AnalysisState::new(net, config);
    state.run();
    state.report()
}

pub fn analyze(net: &Network, model: PefModel, loss: LossModel) -> AnalysisReport {
    analyze_with(net, AnalysisConfig::new(model, loss))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub flow: String,
    pub destination: String,
    pub tight: DelayInterval,
    pub intuitive: DelayInterval,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelComparison {
    pub rows: Vec<ComparisonRow>,
    pub tight: AnalysisReport,
    pub intuitive: AnalysisReport,
}

impl ModelComparison {
    /// Every tight upper bound is at most the intuitive one.
    pub fn tight_dominates(&self) -> bool {
        self.rows.iter().all(|r| r.tight.upper <= r.intuitive.upper)
    }

    pub fn strictly_improved(&self) -> Vec<&ComparisonRow> {
        self.rows.iter().filter(|r| r.tight.upper < r.intuitive.upper).collect()
    }
}

/// Runs both PEF models concurrently and pairs their end-to-end intervals.
pub fn compare_models_with(
    net: &Network,
    loss: LossModel,
    iteration_cap: usize,
    burst_cap: &Rational,
) -> ModelComparison {
    let config = |model| AnalysisConfig { model, loss, iteration_cap, burst_cap: burst_cap.clone() };
    let (tight, intuitive) = std::thread::scope(|s| {
        let t = s.spawn(|| analyze_with(net, config(PefModel::Tight)));
        let i = s.spawn(|| analyze_with(net, config(PefModel::Intuitive)));
        (t.join().expect("tight analysis panicked"), i.join().expect("intuitive analysis panicked"))
    });
    let rows = tight
        .flows
        .iter()
        .zip(&intuitive.flows)
        .map(|(t, i)| ComparisonRow {
            flow: t.flow.clone(),
            destination: t.destination.clone(),
            tight: t.interval.clone(),
            intuitive: i.interval.clone(),
        })
        .collect();
    ModelComparison { rows, tight, intuitive }
}

pub fn compare_models(net: &Network, loss: LossModel) -> ModelComparison {
    compare_models_with(net, loss, DEFAULT_ITERATION_CAP, &default_burst_cap())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{random_feedforward_network, toy_network, ToyVariant};
    use crate::minplus::{RateLatency, TokenBucket};
    use crate::rational::qi;
    use crate::regulators::VerdictKind;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tb(r: i64, b: i64) -> ConcaveCurve {
        ConcaveCurve::token_bucket(qi(r), qi(b))
    }

    fn vbr(parts: &[(i64, i64)]) -> ConcaveCurve {
        ConcaveCurve::from_segments(parts.iter().map(|&(r, b)| TokenBucket::new(qi(r), qi(b)).unwrap()).collect())
            .unwrap()
    }

    fn toy(v: ToyVariant) -> Network {
        Network::from_doc(toy_network(v)).unwrap()
    }

    fn fin(lo: i64, hi: i64) -> DelayInterval {
        DelayInterval::finite(qi(lo), qi(hi))
    }

    #[test]
    fn toy_elimination_tight_and_intuitive() {
        let net = toy(ToyVariant::Pef);
        let tight = analyze(&net, PefModel::Tight, LossModel::Unspecified);
        assert_eq!(tight.convergence.status, ConvergenceStatus::Converged);
        assert_eq!(tight.convergence.iterations, 1);
        let pef = tight.pef("F", "f").unwrap();
        assert_eq!(pef.tight, Some(vbr(&[(2, 4), (1, 8)])));
        assert_eq!(pef.intuitive, Some(tb(2, 4)));
        assert_eq!(pef.reordering.len(), 1);
        assert_eq!(pef.reordering[0].ancestor, "B");
        assert_eq!(pef.reordering[0].bounds, Some(PathDelayBounds::new(qi(0), qi(7))));
        assert_eq!(pef.reordering[0].rto, Bound::Finite(qi(6)));
        assert_eq!(pef.reordering[0].rbo, Bound::Finite(qi(14)));
        assert_eq!(tight.flow_row("f", "F").unwrap().interval, fin(0, 7));
        assert_eq!(tight.vertex("C").unwrap().delay, fin(0, 1));
        assert_eq!(tight.vertex("D").unwrap().delay, fin(6, 7));

        let intuitive = analyze(&net, PefModel::Intuitive, LossModel::Unspecified);
        let pef = intuitive.pef("F", "f").unwrap();
        assert_eq!(pef.reordering[0].rbo, Bound::Finite(qi(16)));
        assert_eq!(intuitive.vertex("F").unwrap().aggregate, Some(tb(2, 4)));
        assert_eq!(tight.vertex("F").unwrap().aggregate, Some(vbr(&[(2, 4), (1, 8)])));
    }

    #[test]
    fn vertex_delay_examples() {
        let v = Vertex {
            name: "x".into(),
            service: Some(RateLatency::new(qi(2), qi(0)).unwrap().into()),
            tech_latency: PathDelayBounds::constant(qi(0)),
        };
        assert_eq!(vertex_delay(&v, Some(&tb(1, 8))), fin(0, 4));
        let w = Vertex { tech_latency: PathDelayBounds::constant(qi(3)), ..v.clone() };
        assert_eq!(vertex_delay(&w, Some(&ConcaveCurve::zero())), fin(3, 3));
        assert_eq!(vertex_delay(&v, Some(&tb(3, 1))).upper, Bound::Unbounded);
        assert_eq!(vertex_delay(&v, None).upper, Bound::Unbounded);
    }

    #[test]
    fn toy_per_flow_regulation() {
        let net = toy(ToyVariant::PefPfr);
        for model in [PefModel::Tight, PefModel::Intuitive] {
            let r = analyze(&net, model, LossModel::Unspecified);
            assert_eq!(r.flow_row("f", "F").unwrap().interval, fin(0, 14), "{model}");
            let reg = r.regulator("F", "f").unwrap();
            assert_eq!(reg.verdict.interval(), Some(&fin(0, 14)));
            assert_eq!(reg.verdict.rto_bound, Some(qi(13)));
        }
    }

    #[test]
    fn toy_ordering_lossless_and_lossy() {
        let net = toy(ToyVariant::PefPof);
        let lossless = analyze(&net, PefModel::Tight, LossModel::Lossless);
        assert_eq!(lossless.flow_row("f", "F").unwrap().interval, fin(0, 7));
        let pof = lossless.pof("F", "f").unwrap();
        assert_eq!(pof.lossless_curve, Some(tb(1, 8)));
        assert_eq!(pof.lossy_curve, Some(tb(1, 14)));
        assert_eq!(pof.timeout_required, Bound::Finite(qi(6)));
        assert_eq!(pof.buffer, Bound::Finite(qi(14)));
        assert_eq!(pof.timeout_sufficient, Some(true));
        assert_eq!(lossless.vertex("F").unwrap().aggregate, Some(tb(1, 8)));
        let lossy = analyze(&net, PefModel::Tight, LossModel::Lossy);
        assert_eq!(lossy.flow_row("f", "F").unwrap().interval, fin(0, 13));
        let unspecified = analyze(&net, PefModel::Tight, LossModel::Unspecified);
        assert_eq!(unspecified.flow_row("f", "F").unwrap().interval, fin(0, 13));
    }

    #[test]
    fn toy_ordering_then_regulation_is_free() {
        let net = toy(ToyVariant::PefPofPfr);
        let lossless = analyze(&net, PefModel::Tight, LossModel::Lossless);
        assert_eq!(lossless.flow_row("f", "F").unwrap().interval, fin(0, 7));
        assert_eq!(lossless.regulator("F", "f").unwrap().verdict.interval(), Some(&fin(0, 7)));
        let lossy = analyze(&net, PefModel::Tight, LossModel::Lossy);
        assert_eq!(lossy.flow_row("f", "F").unwrap().interval, fin(0, 13));
        assert_eq!(lossy.regulator("F", "f").unwrap().verdict.interval(), Some(&fin(0, 13)));
        let ir = analyze(&toy(ToyVariant::PefPofIr { flows: 3 }), PefModel::Tight, LossModel::Lossless);
        assert!(ir.flows.iter().all(|r| r.interval == fin(0, 7)));
        assert!(!ir.any_unbounded());
    }

    #[test]
    fn toy_interleaved_after_elimination_is_unbounded() {
        let net = toy(ToyVariant::PefIr { flows: 13 });
        let r = analyze(&net, PefModel::Tight, LossModel::Lossless);
        assert_eq!(r.vertex("C").unwrap().delay, fin(0, 1));
        let reg = r.regulator("F", "f1").unwrap();
        assert_eq!(reg.verdict.reason(), Some(ReasonCode::IrAfterPefNoPof));
        assert_eq!(reg.verdict.q_min, Some(13));
        assert_eq!(reg.verdict.instability_proven, Some(true));
        assert_eq!(r.flow_row("f7", "F").unwrap().interval.upper, Bound::Unbounded);
        assert!(r.any_unbounded());
        let small = analyze(&toy(ToyVariant::PefIr { flows: 2 }), PefModel::Tight, LossModel::Lossless);
        let reg = small.regulator("F", "f2").unwrap();
        assert!(matches!(reg.verdict.kind, VerdictKind::Unbounded { reason: ReasonCode::IrAfterPefNoPof }));
        assert_eq!(reg.verdict.instability_proven, Some(false));
    }

    fn doc(text: &str) -> Network {
        Network::from_json(text).unwrap()
    }

    #[test]
    fn network_without_elimination_gives_identical_models() {
        let net = doc(r#"{
            "vertices": [
                {"id": "a", "service": {"rate": 10, "latency": 1}},
                {"id": "b", "service": {"rate": 10, "latency": "1/2"}, "tech_latency": {"min": 1, "max": 2}}
            ],
            "edges": [{"from": "a", "to": "b"}],
            "flows": [
                {"id": "x", "source": "a", "destinations": ["b"], "edges": [["a", "b"]],
                 "arrival": {"segments": [{"rate": 2, "burst": 3}]}, "lmin": 1, "lmax": 1, "deadline": 10},
                {"id": "y", "source": "a", "destinations": ["b"], "edges": [["a", "b"]],
                 "arrival": {"segments": [{"rate": 1, "burst": 1}]}, "lmin": 1, "lmax": 1, "deadline": 1}
            ]
        }"#);
        let cmp = compare_models(&net, LossModel::Unspecified);
        assert!(cmp.rows.iter().all(|r| r.tight == r.intuitive));
        // a: 1 + 4/10; b: γ(3, 4 + 3·7/5) against RL(10, 1/2).
        let x = cmp.tight.flow_row("x", "b").unwrap();
        assert_eq!(x.interval.lower, qi(1));
        assert_eq!(x.verdict, DeadlineVerdict::Met);
        assert_eq!(cmp.tight.flow_row("y", "b").unwrap().verdict, DeadlineVerdict::Violated);
        assert!(cmp.tight.any_deadline_violated());
    }

    fn ring() -> Network {
        doc(r#"{
            "vertices": [
                {"id": "A", "service": {"rate": 10, "latency": 1}},
                {"id": "B", "service": {"rate": 10, "latency": 1}},
                {"id": "C", "service": {"rate": 10, "latency": 1}},
                {"id": "D", "service": {"rate": 10, "latency": 1}}
            ],
            "edges": [{"from": "A", "to": "B"}, {"from": "B", "to": "C"}, {"from": "C", "to": "D"}, {"from": "D", "to": "A"}],
            "flows": [
                {"id": "f1", "source": "A", "destinations": ["C"], "edges": [["A", "B"], ["B", "C"]],
                 "arrival": {"segments": [{"rate": 2, "burst": 1}]}, "lmin": 1, "lmax": 1},
                {"id": "f2", "source": "C", "destinations": ["A"], "edges": [["C", "D"], ["D", "A"]],
                 "arrival": {"segments": [{"rate": 2, "burst": 1}]}, "lmin": 1, "lmax": 1},
                {"id": "f3", "source": "B", "destinations": ["D"], "edges": [["B", "C"], ["C", "D"]],
                 "arrival": {"segments": [{"rate": 2, "burst": 1}]}, "lmin": 1, "lmax": 1},
                {"id": "f4", "source": "D", "destinations": ["B"], "edges": [["D", "A"], ["A", "B"]],
                 "arrival": {"segments": [{"rate": 2, "burst": 1}]}, "lmin": 1, "lmax": 1}
            ]
        }"#)
    }

    #[test]
    fn cyclic_network_iterates_monotonically_to_a_fixed_point() {
        let net = ring();
        let mut state = AnalysisState::new(&net, AnalysisConfig::new(PefModel::Tight, LossModel::Unspecified));
        assert!(!state.is_feed_forward());
        let mut previous = state.curves().clone();
        for _ in 0..10 {
            assert!(state.sweep(), "exact equality is only reached in the limit");
            for (key, now) in state.curves() {
                let before = previous[key].as_ref().unwrap();
                assert!(before.le(now.as_ref().unwrap()), "curve at {key:?} decreased");
            }
            previous = state.curves().clone();
        }
        assert_eq!(state.run(), ConvergenceStatus::Converged);
        // The accepted point is a fixed point and dominates every iterate.
        for (key, now) in state.curves() {
            assert!(previous[key].as_ref().unwrap().le(now.as_ref().unwrap()));
        }
        assert!(!state.sweep());
        let report = analyze(&net, PefModel::Tight, LossModel::Unspecified);
        assert_eq!(report.convergence.status, ConvergenceStatus::Converged);
        assert!(report.convergence.iterations >= 2);
        assert!(report.flows.iter().all(|r| r.interval.upper.is_finite()));
    }

    #[test]
    fn iteration_cap_and_burst_cap_are_reported() {
        let net = ring();
        let capped = analyze_with(
            &net,
            AnalysisConfig { iteration_cap: 1, ..AnalysisConfig::new(PefModel::Tight, LossModel::Unspecified) },
        );
        assert_eq!(capped.convergence.status, ConvergenceStatus::IterationCap);
        let burst = analyze_with(
            &net,
            AnalysisConfig { burst_cap: qi(2), ..AnalysisConfig::new(PefModel::Tight, LossModel::Unspecified) },
        );
        assert_eq!(burst.convergence.status, ConvergenceStatus::Diverged);
    }

    #[test]
    fn overload_diverges() {
        let net = doc(r#"{
            "vertices": [{"id": "a", "service": {"rate": 1, "latency": 0}}],
            "flows": [{"id": "x", "source": "a", "destinations": ["a"], "edges": [],
                       "arrival": {"segments": [{"rate": 2, "burst": 1}]}, "lmin": 1, "lmax": 1}]
        }"#);
        let r = analyze(&net, PefModel::Tight, LossModel::Unspecified);
        assert_eq!(r.convergence.status, ConvergenceStatus::Diverged);
        assert_eq!(r.convergence.overloaded, vec!["a".to_string()]);
        assert_eq!(r.flows[0].interval.upper, Bound::Unbounded);
    }

    #[test]
    fn empty_flow_set_gives_empty_report() {
        let net = doc(r#"{"vertices": [{"id": "a"}]}"#);
        let r = analyze(&net, PefModel::Tight, LossModel::Unspecified);
        assert!(r.flows.is_empty());
        assert!(!r.any_unbounded());
        assert_eq!(r.to_csv(), format!("{CSV_HEADER}\n"));
    }

    #[test]
    fn report_round_trips_and_renders_csv() {
        let r = analyze(&toy(ToyVariant::PefPfr), PefModel::Tight, LossModel::Unspecified);
        let text = serde_json::to_string_pretty(&r).unwrap();
        let back: AnalysisReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back, r);
        assert_eq!(r.to_csv(), format!("{CSV_HEADER}\nf,F,tight,0,14,,none\n"));
        let ir = analyze(&toy(ToyVariant::PefIr { flows: 13 }), PefModel::Tight, LossModel::Unspecified);
        let text = serde_json::to_string(&ir).unwrap();
        assert!(text.contains("IR_AFTER_PEF_NO_POF"));
        assert_eq!(serde_json::from_str::<AnalysisReport>(&text).unwrap(), ir);
    }

    #[test]
    fn volvo_tight_dominates_and_helps_a_non_redounded_flow() {
        let net = Network::from_doc(crate::corpus::volvo_network()).unwrap();
        let cmp = compare_models(&net, LossModel::Unspecified);
        assert_eq!(cmp.tight.convergence.status, ConvergenceStatus::Converged);
        assert!(cmp.tight_dominates());
        let improved: BTreeSet<&str> = cmp.strictly_improved().iter().map(|r| r.flow.as_str()).collect();
        assert!(improved.contains("control:P2->MCU3"), "{improved:?}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]
        #[test]
        fn random_networks_respect_model_order(seed in any::<u64>()) {
            let doc = random_feedforward_network(&mut ChaCha8Rng::seed_from_u64(seed));
            let net = Network::from_doc(doc.clone()).unwrap();
            let cmp = compare_models(&net, LossModel::Unspecified);
            prop_assert!(cmp.tight_dominates());
            for r in &cmp.tight.flows {
                prop_assert!(Bound::Finite(r.interval.lower.clone()) <= r.interval.upper);
            }
            // Dropping a flow never loosens anyone else's bound.
            if doc.flows.len() > 1 {
                let mut smaller = doc.clone();
                let gone = smaller.flows.remove(0).id;
                smaller.placements.retain(|p| !p.flows.contains(&gone));
                let net2 = Network::from_doc(smaller).unwrap();
                let r2 = analyze(&net2, PefModel::Tight, LossModel::Unspecified);
                for row in &r2.flows {
                    let full = cmp.tight.flow_row(&row.flow, &row.destination).unwrap();
                    prop_assert!(row.interval.upper <= full.interval.upper);
                }
            }
        }
    }
}
