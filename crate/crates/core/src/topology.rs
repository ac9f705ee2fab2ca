//! Network graph, per-flow DAGs, function placements and the graph
//! predicates the bounds rely on.
//!
//! Vertices are output ports. A flow follows a DAG of network edges rooted at
//! its source. Vertices with several parents receive replicates; unless a PEF
//! for the flow sits there, they are EP-vertices (duplicates may coexist), and
//! so are their PEF-less children.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::minplus::{Bound, ConcaveCurve, ServiceCurve};
use crate::rational::Rational;

pub type VertexId = usize;
pub type FlowIdx = usize;

/// Lower and upper delay bounds; the upper bound may be infinite.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DelayInterval {
    pub lower: Rational,
    pub upper: Bound,
}

impl DelayInterval {
    pub fn new(lower: Rational, upper: Bound) -> Self {
        DelayInterval { lower, upper }
    }

    pub fn finite(lower: Rational, upper: Rational) -> Self {
        DelayInterval { lower, upper: Bound::Finite(upper) }
    }

    pub fn zero() -> Self {
        DelayInterval::finite(Rational::zero(), Rational::zero())
    }

    pub fn plus(&self, other: &DelayInterval) -> DelayInterval {
        DelayInterval { lower: &self.lower + &other.lower, upper: self.upper.plus(&other.upper) }
    }

    pub fn as_path_bounds(&self) -> Option<PathDelayBounds> {
        self.upper.finite().map(|u| PathDelayBounds { lower: self.lower.clone(), upper: u.clone() })
    }

    pub fn contains(&self, delay: &Rational) -> bool {
        *delay >= self.lower
            && match &self.upper {
                Bound::Finite(u) => delay <= u,
                Bound::Unbounded => true,
            }
    }
}

/// Finite `[d, D]` between two points of a flow graph.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PathDelayBounds {
    pub lower: Rational,
    pub upper: Rational,
}

impl PathDelayBounds {
    /// Panics unless `0 ≤ lower ≤ upper`.
    pub fn new(lower: Rational, upper: Rational) -> Self {
        assert!(!lower.is_negative() && lower <= upper, "invalid delay bounds [{lower}, {upper}]");
        PathDelayBounds { lower, upper }
    }

    pub fn constant(delay: Rational) -> Self {
        PathDelayBounds { lower: delay.clone(), upper: delay }
    }

    /// `D − d`.
    pub fn jitter(&self) -> Rational {
        &self.upper - &self.lower
    }

    pub fn to_interval(&self) -> DelayInterval {
        DelayInterval::finite(self.lower.clone(), self.upper.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TopologyError {
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
    #[error("vertex {vertex} is an EP-vertex of flow {flow} with {children} children; duplicates must be eliminated before the flow splits again")]
    ResplitBeforeElimination { flow: String, vertex: String, children: usize },
    #[error("no per-hop bound for vertex {vertex} on the way from {from} to {to}")]
    MissingHopBound { vertex: String, from: String, to: String },
    #[error("{from} is not an ancestor of {to} in the graph of flow {flow}")]
    NotAncestor { flow: String, from: String, to: String },
}

fn invalid(path: impl Into<String>, message: impl Into<String>) -> TopologyError {
    TopologyError::Invalid { path: path.into(), message: message.into() }
}

#[derive(Clone, Debug)]
pub struct Vertex {
    pub name: String,
    /// `None` is an ideal element with no queuing delay.
    pub service: Option<ServiceCurve>,
    pub tech_latency: PathDelayBounds,
}

#[derive(Clone, Debug)]
pub struct Edge {
    pub from: VertexId,
    pub to: VertexId,
    pub lossy: bool,
}

/// A flow's acyclic subgraph, with a topological order of its vertices.
#[derive(Clone, Debug, Default)]
pub struct FlowDag {
    order: Vec<VertexId>,
    parents: BTreeMap<VertexId, Vec<VertexId>>,
    children: BTreeMap<VertexId, Vec<VertexId>>,
}

impl FlowDag {
    /// Builds the DAG from its edges; vertices are those touched by an edge
    /// plus the source. Errors name the offending situation in plain words.
    pub fn build(source: VertexId, edges: &[(VertexId, VertexId)]) -> Result<FlowDag, String> {
        let mut parents: BTreeMap<VertexId, Vec<VertexId>> = BTreeMap::new();
        let mut children: BTreeMap<VertexId, Vec<VertexId>> = BTreeMap::new();
        parents.entry(source).or_default();
        children.entry(source).or_default();
        for &(a, b) in edges {
            if a == b {
                return Err("self-loop".into());
            }
            let ch = children.entry(a).or_default();
            if ch.contains(&b) {
                return Err("duplicate edge".into());
            }
            ch.push(b);
            parents.entry(b).or_default().push(a);
            parents.entry(a).or_default();
            children.entry(b).or_default();
        }
        if !parents[&source].is_empty() {
            return Err("the source has an incoming edge".into());
        }
        // Kahn's algorithm, smallest vertex id first for determinism.
        let mut indegree: BTreeMap<VertexId, usize> = parents.iter().map(|(v, p)| (*v, p.len())).collect();
        let mut ready: BTreeSet<VertexId> = indegree.iter().filter(|(_, d)| **d == 0).map(|(v, _)| *v).collect();
        if ready.len() != 1 {
            return Err("some vertex is not reachable from the source".into());
        }
        let mut order = Vec::with_capacity(parents.len());
        while let Some(v) = ready.pop_first() {
            order.push(v);
            for c in &children[&v] {
                let d = indegree.get_mut(c).expect("known vertex");
                *d -= 1;
                if *d == 0 {
                    ready.insert(*c);
                }
            }
        }
        if order.len() != parents.len() {
            let cyclic = indegree.iter().any(|(_, d)| *d > 0);
            return Err(if cyclic {
                "the flow graph has a cycle or an unreachable vertex".into()
            } else {
                "some vertex is not reachable from the source".into()
            });
        }
        Ok(FlowDag { order, parents, children })
    }

    pub fn order(&self) -> &[VertexId] {
        &self.order
    }

    pub fn contains(&self, v: VertexId) -> bool {
        self.parents.contains_key(&v)
    }

    pub fn parents(&self, v: VertexId) -> &[VertexId] {
        self.parents.get(&v).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn children(&self, v: VertexId) -> &[VertexId] {
        self.children.get(&v).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn source(&self) -> VertexId {
        self.order[0]
    }

    /// Vertices that can reach `n` (including `n`).
    pub fn ancestors_of(&self, n: VertexId) -> BTreeSet<VertexId> {
        let mut seen = BTreeSet::new();
        let mut stack = vec![n];
        while let Some(v) = stack.pop() {
            if seen.insert(v) {
                stack.extend(self.parents(v).iter().copied());
            }
        }
        seen
    }

    /// Vertices reachable from `a` (including `a`).
    pub fn descendants_of(&self, a: VertexId) -> BTreeSet<VertexId> {
        let mut seen = BTreeSet::new();
        let mut stack = vec![a];
        while let Some(v) = stack.pop() {
            if seen.insert(v) {
                stack.extend(self.children(v).iter().copied());
            }
        }
        seen
    }

    /// All paths from `a` to `n` as vertex lists, stopping after `limit`.
    pub fn paths(&self, a: VertexId, n: VertexId, limit: usize) -> Vec<Vec<VertexId>> {
        let reach = self.ancestors_of(n);
        let mut out = Vec::new();
        let mut current = vec![a];
        self.walk(n, &reach, &mut current, &mut out, limit);
        out
    }

    fn walk(
        &self,
        n: VertexId,
        reach: &BTreeSet<VertexId>,
        current: &mut Vec<VertexId>,
        out: &mut Vec<Vec<VertexId>>,
        limit: usize,
    ) {
        if out.len() >= limit {
            return;
        }
        let v = *current.last().expect("nonempty");
        if v == n {
            out.push(current.clone());
            return;
        }
        for &c in self.children(v) {
            if reach.contains(&c) {
                current.push(c);
                self.walk(n, reach, current, out, limit);
                current.pop();
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct Flow {
    pub id: String,
    pub source: VertexId,
    pub destinations: Vec<VertexId>,
    pub dag: FlowDag,
    pub arrival: ConcaveCurve,
    pub l_min: Rational,
    pub l_max: Rational,
    pub deadlines: BTreeMap<VertexId, Rational>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegulatorMode {
    PerFlow,
    Interleaved,
}

#[derive(Clone, Debug)]
pub enum Function {
    Pef,
    Pof { reference: VertexId, timeout: Option<Rational> },
    Reg { mode: RegulatorMode, reference: VertexId, shaping: BTreeMap<FlowIdx, ConcaveCurve> },
}

impl Function {
    fn stage(&self) -> u8 {
        match self {
            Function::Pef => 0,
            Function::Pof { .. } => 1,
            Function::Reg { .. } => 2,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Function::Pef => "pef",
            Function::Pof { .. } => "pof",
            Function::Reg { .. } => "reg",
        }
    }
}

#[derive(Clone, Debug)]
pub struct Placement {
    pub vertex: VertexId,
    pub flows: Vec<FlowIdx>,
    pub function: Function,
}

/// A validated network with flows and function placements.
#[derive(Clone, Debug)]
pub struct Network {
    vertices: Vec<Vertex>,
    edges: Vec<Edge>,
    flows: Vec<Flow>,
    placements: Vec<Placement>,
    index: BTreeMap<String, VertexId>,
    pef_sites: Vec<BTreeSet<VertexId>>,
    ep: Vec<BTreeSet<VertexId>>,
}

/// Computes the EP-vertices of a flow given the vertices holding a PEF for it.
pub fn ep_vertices(
    flow: &Flow,
    pef_sites: &BTreeSet<VertexId>,
    names: &dyn Fn(VertexId) -> String,
) -> Result<BTreeSet<VertexId>, TopologyError> {
    let mut ep = BTreeSet::new();
    for &v in flow.dag.order() {
        if pef_sites.contains(&v) {
            continue;
        }
        let parents = flow.dag.parents(v);
        if parents.len() >= 2 || parents.iter().any(|p| ep.contains(p)) {
            ep.insert(v);
        }
    }
    for &v in &ep {
        let children = flow.dag.children(v).len();
        if children > 1 {
            return Err(TopologyError::ResplitBeforeElimination { flow: flow.id.clone(), vertex: names(v), children });
        }
    }
    Ok(ep)
}

/// Non-EP vertices on every source→`n` path, `n` included when it is not EP.
/// Dominators by set intersection along a topological order.
pub fn diamond_ancestors(flow: &Flow, ep: &BTreeSet<VertexId>, n: VertexId) -> BTreeSet<VertexId> {
    let mut dom: BTreeMap<VertexId, BTreeSet<VertexId>> = BTreeMap::new();
    let relevant = flow.dag.ancestors_of(n);
    for &v in flow.dag.order() {
        if !relevant.contains(&v) {
            continue;
        }
        let mut set = flow
            .dag
            .parents(v)
            .iter()
            .filter_map(|p| dom.get(p))
            .fold(None::<BTreeSet<VertexId>>, |acc, s| match acc {
                None => Some(s.clone()),
                Some(a) => Some(a.intersection(s).copied().collect()),
            })
            .unwrap_or_default();
        set.insert(v);
        dom.insert(v, set);
        if v == n {
            break;
        }
    }
    dom.remove(&n).unwrap_or_default().into_iter().filter(|v| !ep.contains(v)).collect()
}

/// `[d, D]` from the output of `a` to the input of `n`: extremal sums of the
/// per-hop intervals of the vertices strictly between them.
pub fn path_delay_bounds(
    flow: &Flow,
    a: VertexId,
    n: VertexId,
    per_hop: &BTreeMap<VertexId, DelayInterval>,
    names: &dyn Fn(VertexId) -> String,
) -> Result<DelayInterval, TopologyError> {
    let between: BTreeSet<VertexId> =
        flow.dag.descendants_of(a).intersection(&flow.dag.ancestors_of(n)).copied().collect();
    if a == n || !between.contains(&n) || !between.contains(&a) {
        return Err(TopologyError::NotAncestor { flow: flow.id.clone(), from: names(a), to: names(n) });
    }
    // best[v]: extremal sums up to the output of v, excluding a itself.
    let mut best: BTreeMap<VertexId, DelayInterval> = BTreeMap::new();
    best.insert(a, DelayInterval::zero());
    for &v in flow.dag.order() {
        if v == a || !between.contains(&v) {
            continue;
        }
        let mut lower: Option<Rational> = None;
        let mut upper: Option<Bound> = None;
        for p in flow.dag.parents(v) {
            if let Some(b) = best.get(p) {
                lower = Some(match lower {
                    Some(l) => l.min(b.lower.clone()),
                    None => b.lower.clone(),
                });
                upper = Some(match upper {
                    Some(u) => u.max(b.upper.clone()),
                    None => b.upper.clone(),
                });
            }
        }
        let arrived = DelayInterval::new(lower.expect("a parent lies between"), upper.expect("same"));
        if v == n {
            return Ok(arrived);
        }
        let hop = per_hop.get(&v).ok_or_else(|| TopologyError::MissingHopBound {
            vertex: names(v),
            from: names(a),
            to: names(n),
        })?;
        best.insert(v, arrived.plus(hop));
    }
    unreachable!("n lies between a and n")
}

impl Network {
    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn flows(&self) -> &[Flow] {
        &self.flows
    }

    pub fn placements(&self) -> &[Placement] {
        &self.placements
    }

    pub fn vertex_id(&self, name: &str) -> Option<VertexId> {
        self.index.get(name).copied()
    }

    pub fn vertex_name(&self, v: VertexId) -> &str {
        &self.vertices[v].name
    }

    pub fn flow_index(&self, id: &str) -> Option<FlowIdx> {
        self.flows.iter().position(|f| f.id == id)
    }

    pub fn has_pef(&self, f: FlowIdx, v: VertexId) -> bool {
        self.pef_sites[f].contains(&v)
    }

    pub fn ep_set(&self, f: FlowIdx) -> &BTreeSet<VertexId> {
        &self.ep[f]
    }

    pub fn is_ep(&self, f: FlowIdx, v: VertexId) -> bool {
        self.ep[f].contains(&v)
    }

    pub fn diamond_ancestors(&self, f: FlowIdx, n: VertexId) -> BTreeSet<VertexId> {
        diamond_ancestors(&self.flows[f], &self.ep[f], n)
    }

    pub fn path_delay_bounds(
        &self,
        f: FlowIdx,
        a: VertexId,
        n: VertexId,
        per_hop: &BTreeMap<VertexId, DelayInterval>,
    ) -> Result<DelayInterval, TopologyError> {
        path_delay_bounds(&self.flows[f], a, n, per_hop, &|v| self.vertices[v].name.clone())
    }

    /// Flows whose DAG contains `v`.
    pub fn flows_at(&self, v: VertexId) -> Vec<FlowIdx> {
        (0..self.flows.len()).filter(|&f| self.flows[f].dag.contains(v)).collect()
    }

    /// Placements at `v`, in pipeline order.
    pub fn pipeline(&self, v: VertexId) -> Vec<&Placement> {
        let mut out: Vec<&Placement> = self.placements.iter().filter(|p| p.vertex == v).collect();
        out.sort_by_key(|p| p.function.stage());
        out
    }

    /// Children of `v` over the union of all flow graphs.
    pub fn class_children(&self, v: VertexId) -> BTreeSet<VertexId> {
        self.flows.iter().flat_map(|f| f.dag.children(v).iter().copied()).collect()
    }

    /// Topological order of the union of flow graphs, or `None` if it has a cycle.
    pub fn class_topological_order(&self) -> Option<Vec<VertexId>> {
        let mut indegree = vec![0usize; self.vertices.len()];
        let children: Vec<BTreeSet<VertexId>> = (0..self.vertices.len()).map(|v| self.class_children(v)).collect();
        for ch in &children {
            for &c in ch {
                indegree[c] += 1;
            }
        }
        let mut ready: BTreeSet<VertexId> = (0..self.vertices.len()).filter(|&v| indegree[v] == 0).collect();
        let mut order = Vec::with_capacity(self.vertices.len());
        while let Some(v) = ready.pop_first() {
            order.push(v);
            for &c in &children[v] {
                indegree[c] -= 1;
                if indegree[c] == 0 {
                    ready.insert(c);
                }
            }
        }
        (order.len() == self.vertices.len()).then_some(order)
    }

    /// Sweep order for the fixed point: topological when acyclic, otherwise a
    /// depth-first reverse postorder that follows flow edges from sources.
    pub fn sweep_order(&self) -> (Vec<VertexId>, bool) {
        if let Some(order) = self.class_topological_order() {
            return (order, true);
        }
        let mut visited = vec![false; self.vertices.len()];
        let mut post = Vec::new();
        let mut roots: Vec<VertexId> = self.flows.iter().map(|f| f.source).collect();
        roots.extend(0..self.vertices.len());
        for r in roots {
            if visited[r] {
                continue;
            }
            let mut stack = vec![(r, false)];
            while let Some((v, done)) = stack.pop() {
                if done {
                    post.push(v);
                    continue;
                }
                if visited[v] {
                    continue;
                }
                visited[v] = true;
                stack.push((v, true));
                let children: Vec<VertexId> = self.class_children(v).into_iter().rev().collect();
                for c in children {
                    if !visited[c] {
                        stack.push((c, false));
                    }
                }
            }
        }
        post.reverse();
        (post, false)
    }

    /// Loads and validates a network document.
    pub fn from_json(text: &str) -> Result<Network, TopologyError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let doc: NetworkDoc = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            invalid(if path == "." { "$".to_string() } else { format!("$.{path}") }, e.into_inner().to_string())
        })?;
        Network::from_doc(doc)
    }

    pub fn from_doc(doc: NetworkDoc) -> Result<Network, TopologyError> {
        let mut index = BTreeMap::new();
        let mut vertices = Vec::with_capacity(doc.vertices.len());
        for (i, v) in doc.vertices.into_iter().enumerate() {
            let path = format!("$.vertices[{i}]");
            if index.insert(v.id.clone(), i).is_some() {
                return Err(invalid(format!("{path}.id"), format!("duplicate vertex {:?}", v.id)));
            }
            let tech = match v.tech_latency {
                None => PathDelayBounds::constant(Rational::zero()),
                Some(t) => {
                    if t.min.is_negative() || t.min > t.max {
                        return Err(invalid(format!("{path}.tech_latency"), "need 0 ≤ min ≤ max"));
                    }
                    PathDelayBounds::new(t.min, t.max)
                }
            };
            vertices.push(Vertex { name: v.id, service: v.service, tech_latency: tech });
        }
        let lookup = |name: &str, path: String| -> Result<VertexId, TopologyError> {
            index.get(name).copied().ok_or_else(|| invalid(path, format!("unknown vertex {name:?}")))
        };
        let mut edges = Vec::with_capacity(doc.edges.len());
        let mut edge_set = BTreeSet::new();
        for (i, e) in doc.edges.iter().enumerate() {
            let from = lookup(&e.from, format!("$.edges[{i}].from"))?;
            let to = lookup(&e.to, format!("$.edges[{i}].to"))?;
            if from == to {
                return Err(invalid(format!("$.edges[{i}]"), "self-loop"));
            }
            if !edge_set.insert((from, to)) {
                return Err(invalid(format!("$.edges[{i}]"), "duplicate edge"));
            }
            edges.push(Edge { from, to, lossy: e.lossy });
        }

        let mut flows = Vec::with_capacity(doc.flows.len());
        for (i, f) in doc.flows.into_iter().enumerate() {
            let path = format!("$.flows[{i}]");
            if flows.iter().any(|g: &Flow| g.id == f.id) {
                return Err(invalid(format!("{path}.id"), format!("duplicate flow {:?}", f.id)));
            }
            let source = lookup(&f.source, format!("{path}.source"))?;
            let mut dag_edges = Vec::with_capacity(f.edges.len());
            for (j, (a, b)) in f.edges.iter().enumerate() {
                let ep = format!("{path}.edges[{j}]");
                let a = lookup(a, ep.clone())?;
                let b = lookup(b, ep.clone())?;
                if !edge_set.contains(&(a, b)) {
                    return Err(invalid(ep, "not an edge of the network"));
                }
                dag_edges.push((a, b));
            }
            let dag = FlowDag::build(source, &dag_edges).map_err(|m| invalid(format!("{path}.edges"), m))?;
            if f.destinations.is_empty() {
                return Err(invalid(format!("{path}.destinations"), "a flow needs a destination"));
            }
            let mut destinations = Vec::new();
            for (j, d) in f.destinations.iter().enumerate() {
                let dp = format!("{path}.destinations[{j}]");
                let v = lookup(d, dp.clone())?;
                if !dag.contains(v) {
                    return Err(invalid(dp, "destination not reachable in the flow graph"));
                }
                if destinations.contains(&v) {
                    return Err(invalid(dp, "duplicate destination"));
                }
                destinations.push(v);
            }
            if !f.lmin.is_positive() {
                return Err(invalid(format!("{path}.lmin"), "minimum packet length must be positive"));
            }
            if f.lmin > f.lmax {
                return Err(invalid(format!("{path}.lmax"), "lmax below lmin"));
            }
            let mut deadlines = BTreeMap::new();
            match f.deadline {
                None => {}
                Some(DeadlineDoc::All(d)) => {
                    for &v in &destinations {
                        deadlines.insert(v, d.clone());
                    }
                }
                Some(DeadlineDoc::PerDestination(map)) => {
                    for (name, d) in map {
                        let dp = format!("{path}.deadline.{name}");
                        let v = lookup(&name, dp.clone())?;
                        if !destinations.contains(&v) {
                            return Err(invalid(dp, "deadline for a vertex that is not a destination"));
                        }
                        deadlines.insert(v, d);
                    }
                }
            }
            if deadlines.values().any(Rational::is_negative) {
                return Err(invalid(format!("{path}.deadline"), "negative deadline"));
            }
            flows.push(Flow {
                id: f.id,
                source,
                destinations,
                dag,
                arrival: f.arrival,
                l_min: f.lmin,
                l_max: f.lmax,
                deadlines,
            });
        }

        let flow_lookup = |id: &str, path: String| -> Result<FlowIdx, TopologyError> {
            flows.iter().position(|f| f.id == id).ok_or_else(|| invalid(path, format!("unknown flow {id:?}")))
        };
        let mut placements = Vec::with_capacity(doc.placements.len());
        let mut stage_seen: BTreeMap<VertexId, u8> = BTreeMap::new();
        let mut taken: BTreeSet<(VertexId, FlowIdx, u8)> = BTreeSet::new();
        for (i, p) in doc.placements.into_iter().enumerate() {
            let path = format!("$.placements[{i}]");
            let vertex = lookup(&p.vertex, format!("{path}.vertex"))?;
            if p.flows.is_empty() {
                return Err(invalid(format!("{path}.flows"), "a placement needs at least one flow"));
            }
            let mut fl = Vec::new();
            for (j, id) in p.flows.iter().enumerate() {
                let fp = format!("{path}.flows[{j}]");
                let f = flow_lookup(id, fp.clone())?;
                if !flows[f].dag.contains(vertex) {
                    return Err(invalid(fp, "the flow does not cross this vertex"));
                }
                if fl.contains(&f) {
                    return Err(invalid(fp, "flow listed twice"));
                }
                fl.push(f);
            }
            let function = match p.kind {
                PlacementKind::Pef => Function::Pef,
                PlacementKind::Pof => {
                    let reference = lookup(
                        p.reference.as_deref().ok_or_else(|| invalid(format!("{path}.reference"), "missing"))?,
                        format!("{path}.reference"),
                    )?;
                    if p.timeout.as_ref().is_some_and(Rational::is_negative) {
                        return Err(invalid(format!("{path}.timeout"), "negative timeout"));
                    }
                    Function::Pof { reference, timeout: p.timeout }
                }
                PlacementKind::Reg => {
                    let reference = lookup(
                        p.reference.as_deref().ok_or_else(|| invalid(format!("{path}.reference"), "missing"))?,
                        format!("{path}.reference"),
                    )?;
                    let mode = p.mode.ok_or_else(|| invalid(format!("{path}.mode"), "missing"))?;
                    let mut shaping = BTreeMap::new();
                    let given = p.shaping.unwrap_or_default();
                    for (name, curve) in given {
                        let f = flow_lookup(&name, format!("{path}.shaping.{name}"))?;
                        if !fl.contains(&f) {
                            return Err(invalid(format!("{path}.shaping.{name}"), "flow not regulated here"));
                        }
                        shaping.insert(f, curve);
                    }
                    if let Some(&missing) = fl.iter().find(|f| !shaping.contains_key(f)) {
                        return Err(invalid(
                            format!("{path}.shaping"),
                            format!("no shaping curve for flow {:?}", flows[missing].id),
                        ));
                    }
                    Function::Reg { mode, reference, shaping }
                }
            };
            let stage = function.stage();
            let seen = stage_seen.entry(vertex).or_insert(0);
            if stage < *seen {
                return Err(invalid(path, "pipeline order at a vertex is PEFs, then POF, then REG"));
            }
            *seen = stage;
            for &f in &fl {
                if !taken.insert((vertex, f, stage)) {
                    return Err(invalid(
                        format!("{path}.flows"),
                        format!("flow {:?} already has a {} at this vertex", flows[f].id, function.kind_name()),
                    ));
                }
            }
            placements.push(Placement { vertex, flows: fl, function });
        }

        let mut net = Network { vertices, edges, flows, placements, index, pef_sites: Vec::new(), ep: Vec::new() };
        net.derive_sets()?;
        net.check_placements()?;
        Ok(net)
    }

    fn derive_sets(&mut self) -> Result<(), TopologyError> {
        self.pef_sites = vec![BTreeSet::new(); self.flows.len()];
        for p in &self.placements {
            if matches!(p.function, Function::Pef) {
                for &f in &p.flows {
                    self.pef_sites[f].insert(p.vertex);
                }
            }
        }
        let names = |v: VertexId| self.vertices[v].name.clone();
        self.ep = self
            .flows
            .iter()
            .zip(&self.pef_sites)
            .map(|(f, sites)| ep_vertices(f, sites, &names))
            .collect::<Result<_, _>>()?;
        Ok(())
    }

    fn check_placements(&self) -> Result<(), TopologyError> {
        for (i, p) in self.placements.iter().enumerate() {
            let path = format!("$.placements[{i}]");
            for &f in &p.flows {
                let flow = &self.flows[f];
                match &p.function {
                    Function::Pef => {
                        let parents = flow.dag.parents(p.vertex);
                        if parents.len() < 2 && !parents.iter().any(|q| self.ep[f].contains(q)) {
                            return Err(invalid(
                                path,
                                format!("flow {:?} cannot carry duplicates at this vertex; a PEF belongs where paths merge or after", flow.id),
                            ));
                        }
                    }
                    Function::Pof { reference, .. } | Function::Reg { reference, .. } => {
                        if self.ep[f].contains(&p.vertex) {
                            return Err(invalid(
                                path,
                                format!("vertex is an EP-vertex of flow {:?}; ordering and regulation need duplicates removed first", flow.id),
                            ));
                        }
                        let anc = self.diamond_ancestors(f, p.vertex);
                        if *reference == p.vertex || !anc.contains(reference) {
                            return Err(invalid(
                                format!("{path}.reference"),
                                format!(
                                    "{} is not a diamond ancestor of {} for flow {:?}",
                                    self.vertex_name(*reference),
                                    self.vertex_name(p.vertex),
                                    flow.id
                                ),
                            ));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// JSON document layout of a network.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkDoc {
    pub vertices: Vec<VertexDoc>,
    #[serde(default)]
    pub edges: Vec<EdgeDoc>,
    #[serde(default)]
    pub flows: Vec<FlowDoc>,
    #[serde(default)]
    pub placements: Vec<PlacementDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VertexDoc {
    pub id: String,
    #[serde(default)]
    pub service: Option<ServiceCurve>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tech_latency: Option<LatencyDoc>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatencyDoc {
    pub min: Rational,
    pub max: Rational,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeDoc {
    pub from: String,
    pub to: String,
    #[serde(default)]
    pub lossy: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DeadlineDoc {
    All(Rational),
    PerDestination(BTreeMap<String, Rational>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowDoc {
    pub id: String,
    pub source: String,
    pub destinations: Vec<String>,
    pub edges: Vec<(String, String)>,
    pub arrival: ConcaveCurve,
    pub lmin: Rational,
    pub lmax: Rational,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deadline: Option<DeadlineDoc>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlacementKind {
    Pef,
    Pof,
    Reg,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlacementDoc {
    pub kind: PlacementKind,
    pub vertex: String,
    pub flows: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timeout: Option<Rational>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<RegulatorMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shaping: Option<BTreeMap<String, ConcaveCurve>>,
}
