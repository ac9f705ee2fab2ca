//! Bundled networks: the four-vertex toy network and its variants, a
//! Volvo-shaped automotive topology with placeholder traffic, and a generator
//! of random feed-forward networks with replication and elimination.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng;

use crate::minplus::{ConcaveCurve, RateLatency, ServiceCurve, TokenBucket};
use crate::rational::{q, qi, Rational};
use crate::topology::{
    DeadlineDoc, EdgeDoc, FlowDoc, LatencyDoc, NetworkDoc, PlacementDoc, PlacementKind, RegulatorMode, VertexDoc,
};

fn vertex(id: &str, service: Option<ServiceCurve>, tech: (Rational, Rational)) -> VertexDoc {
    VertexDoc { id: id.to_string(), service, tech_latency: Some(LatencyDoc { min: tech.0, max: tech.1 }) }
}

fn rate_latency(rate: Rational, latency: Rational) -> ServiceCurve {
    ServiceCurve::RateLatency(RateLatency::new(rate, latency).expect("positive rate"))
}

fn edge(from: &str, to: &str) -> EdgeDoc {
    EdgeDoc { from: from.to_string(), to: to.to_string(), lossy: false }
}

fn pairs(list: &[(&str, &str)]) -> Vec<(String, String)> {
    list.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect()
}

fn placement(kind: PlacementKind, vertex: &str, flows: &[String]) -> PlacementDoc {
    PlacementDoc {
        kind,
        vertex: vertex.to_string(),
        flows: flows.to_vec(),
        reference: None,
        timeout: None,
        mode: None,
        shaping: None,
    }
}

/// Which functions follow the PEF at `F` in a toy-network variant.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ToyVariant {
    Pef,
    PefPof,
    PefPfr,
    PefPofPfr,
    /// `q` flows sharing the two paths, eliminated then interleaved-regulated.
    PefIr {
        flows: usize,
    },
    /// Same aggregate with a POF between elimination and regulation.
    PefPofIr {
        flows: usize,
    },
}

/// Source `B` (ideal), paths through `C` (delay in [0,1]) and `D` (in [6,7]),
/// merge and elimination at `F`. Flows are γ_{1,1} with unit packets.
pub fn toy_network(variant: ToyVariant) -> NetworkDoc {
    let q_flows = match variant {
        ToyVariant::PefIr { flows } | ToyVariant::PefPofIr { flows } => flows,
        _ => 1,
    };
    let rate = qi(q_flows as i64);
    let vertices = vec![
        vertex("B", None, (qi(0), qi(0))),
        vertex("C", Some(rate_latency(rate.clone(), qi(0))), (qi(0), qi(0))),
        vertex("D", Some(rate_latency(rate, qi(0))), (qi(6), qi(6))),
        vertex("F", None, (qi(0), qi(0))),
    ];
    let edges = vec![edge("B", "C"), edge("B", "D"), edge("C", "F"), edge("D", "F")];
    let ids: Vec<String> =
        if q_flows == 1 { vec!["f".to_string()] } else { (1..=q_flows).map(|i| format!("f{i}")).collect() };
    let flows = ids
        .iter()
        .map(|id| FlowDoc {
            id: id.clone(),
            source: "B".into(),
            destinations: vec!["F".into()],
            edges: pairs(&[("B", "C"), ("B", "D"), ("C", "F"), ("D", "F")]),
            arrival: ConcaveCurve::token_bucket(qi(1), qi(1)),
            lmin: qi(1),
            lmax: qi(1),
            deadline: None,
        })
        .collect();
    let mut placements = vec![placement(PlacementKind::Pef, "F", &ids)];
    let pof = || PlacementDoc {
        reference: Some("B".into()),
        timeout: Some(qi(6)),
        ..placement(PlacementKind::Pof, "F", &ids)
    };
    let reg = |mode| PlacementDoc {
        reference: Some("B".into()),
        mode: Some(mode),
        shaping: Some(ids.iter().map(|id| (id.clone(), ConcaveCurve::token_bucket(qi(1), qi(1)))).collect()),
        ..placement(PlacementKind::Reg, "F", &ids)
    };
    let note = match variant {
        ToyVariant::Pef => "toy network: elimination at F",
        ToyVariant::PefPof => "toy network: elimination then ordering (timeout 6) at F",
        ToyVariant::PefPfr => "toy network: elimination then per-flow regulation at F",
        ToyVariant::PefPofPfr => "toy network: elimination, ordering (timeout 6), per-flow regulation at F",
        ToyVariant::PefIr { .. } => "toy network: several flows eliminated then interleaved-regulated at F",
        ToyVariant::PefPofIr { .. } => "toy network: several flows eliminated, ordered, interleaved-regulated at F",
    };
    match variant {
        ToyVariant::Pef => {}
        ToyVariant::PefPof => placements.push(pof()),
        ToyVariant::PefPfr => placements.push(reg(RegulatorMode::PerFlow)),
        ToyVariant::PefPofPfr => {
            placements.push(pof());
            placements.push(reg(RegulatorMode::PerFlow));
        }
        ToyVariant::PefIr { .. } => placements.push(reg(RegulatorMode::Interleaved)),
        ToyVariant::PefPofIr { .. } => {
            placements.push(pof());
            placements.push(reg(RegulatorMode::Interleaved));
        }
    }
    NetworkDoc { vertices, edges, flows, placements, note: Some(note.to_string()) }
}

/// Placeholder traffic profile for the automotive topology: rate in bit/s,
/// burst and packet sizes in bits, deadline in seconds.
struct Profile {
    name: &'static str,
    rate: i64,
    burst: i64,
    lmin: i64,
    lmax: i64,
    deadline: Rational,
}

fn profiles() -> Vec<Profile> {
    vec![
        Profile { name: "control", rate: 1_000_000, burst: 12_000, lmin: 512, lmax: 12_000, deadline: q(1, 1000) },
        Profile { name: "audio", rate: 2_000_000, burst: 24_000, lmin: 512, lmax: 12_000, deadline: q(2, 1000) },
        Profile { name: "video", rate: 10_000_000, burst: 96_000, lmin: 4_096, lmax: 12_000, deadline: q(5, 1000) },
        Profile { name: "sensor", rate: 500_000, burst: 4_000, lmin: 512, lmax: 4_000, deadline: q(1, 1000) },
    ]
}

fn port(a: &str, b: &str) -> String {
    format!("{a}->{b}")
}

/// Automotive-style topology: two processing units `P1`, `P2` and four
/// micro-controllers on switches `SW1`–`SW4` joined by a redundant core of
/// `SWA` and `SWB`. Vertices are output ports `X->Y`. Links to
/// micro-controllers run at 100 Mbit/s, others at 1 Gbit/s, with
/// technological latency in [0, 2 µs]. Traffic values are placeholders.
pub fn volvo_network() -> NetworkDoc {
    let links: &[(&str, &str)] = &[
        ("P1", "SW1"),
        ("MCU1", "SW1"),
        ("P2", "SW2"),
        ("MCU2", "SW2"),
        ("MCU3", "SW3"),
        ("MCU4", "SW4"),
        ("SW1", "SWA"),
        ("SW1", "SWB"),
        ("SW2", "SWA"),
        ("SW2", "SWB"),
        ("SWA", "SWB"),
        ("SW3", "SWA"),
        ("SW4", "SWB"),
    ];
    let tech = (qi(0), q(2, 1_000_000));
    let mut vertices = Vec::new();
    let mut ports = BTreeSet::new();
    for (a, b) in links {
        let slow = a.starts_with("MCU") || b.starts_with("MCU");
        let rate = if slow { qi(100_000_000) } else { qi(1_000_000_000) };
        for (x, y) in [(a, b), (b, a)] {
            let id = port(x, y);
            ports.insert(id.clone());
            vertices.push(vertex(&id, Some(rate_latency(rate.clone(), qi(0))), tech.clone()));
        }
    }
    // Routes as lists of port sequences; several sequences form a redundant DAG.
    let p = |hops: &[&str]| -> Vec<String> { hops.windows(2).map(|w| port(w[0], w[1])).collect() };
    struct Route {
        from: &'static str,
        to: Vec<&'static str>,
        paths: Vec<Vec<String>>,
        pefs: Vec<String>,
    }
    let routes = vec![
        Route {
            from: "MCU1",
            to: vec!["P1", "P2"],
            paths: vec![
                p(&["MCU1", "SW1", "P1"]),
                p(&["MCU1", "SW1", "SWA", "SW2", "P2"]),
                p(&["MCU1", "SW1", "SWB", "SW2", "P2"]),
            ],
            pefs: vec![port("SW2", "P2")],
        },
        Route {
            from: "MCU2",
            to: vec!["P1", "P2"],
            paths: vec![
                p(&["MCU2", "SW2", "P2"]),
                p(&["MCU2", "SW2", "SWA", "SW1", "P1"]),
                p(&["MCU2", "SW2", "SWB", "SW1", "P1"]),
            ],
            pefs: vec![port("SW1", "P1")],
        },
        Route {
            from: "MCU3",
            to: vec!["P1", "P2"],
            paths: vec![
                p(&["MCU3", "SW3", "SWA", "SW1", "P1"]),
                p(&["MCU3", "SW3", "SWA", "SWB", "SW1", "P1"]),
                p(&["MCU3", "SW3", "SWA", "SW2", "P2"]),
                p(&["MCU3", "SW3", "SWA", "SWB", "SW2", "P2"]),
            ],
            pefs: vec![port("SW1", "P1"), port("SW2", "P2")],
        },
        Route {
            from: "MCU4",
            to: vec!["P1", "P2"],
            paths: vec![
                p(&["MCU4", "SW4", "SWB", "SW1", "P1"]),
                p(&["MCU4", "SW4", "SWB", "SWA", "SW1", "P1"]),
                p(&["MCU4", "SW4", "SWB", "SW2", "P2"]),
                p(&["MCU4", "SW4", "SWB", "SWA", "SW2", "P2"]),
            ],
            pefs: vec![port("SW1", "P1"), port("SW2", "P2")],
        },
        Route { from: "P1", to: vec!["MCU1"], paths: vec![p(&["P1", "SW1", "MCU1"])], pefs: vec![] },
        Route { from: "P2", to: vec!["MCU2"], paths: vec![p(&["P2", "SW2", "MCU2"])], pefs: vec![] },
        Route {
            from: "P1",
            to: vec!["MCU2"],
            paths: vec![p(&["P1", "SW1", "SWA", "SW2", "MCU2"]), p(&["P1", "SW1", "SWB", "SW2", "MCU2"])],
            pefs: vec![port("SW2", "MCU2")],
        },
        Route {
            from: "P2",
            to: vec!["MCU1"],
            paths: vec![p(&["P2", "SW2", "SWA", "SW1", "MCU1"]), p(&["P2", "SW2", "SWB", "SW1", "MCU1"])],
            pefs: vec![port("SW1", "MCU1")],
        },
        Route {
            from: "P1",
            to: vec!["MCU3"],
            paths: vec![p(&["P1", "SW1", "SWA", "SW3", "MCU3"]), p(&["P1", "SW1", "SWB", "SWA", "SW3", "MCU3"])],
            pefs: vec![port("SWA", "SW3")],
        },
        // Not redounded, but shares SWA->SW3 with the previous flow.
        Route { from: "P2", to: vec!["MCU3"], paths: vec![p(&["P2", "SW2", "SWA", "SW3", "MCU3"])], pefs: vec![] },
        Route { from: "P1", to: vec!["MCU4"], paths: vec![p(&["P1", "SW1", "SWB", "SW4", "MCU4"])], pefs: vec![] },
        Route {
            from: "P2",
            to: vec!["MCU4"],
            paths: vec![p(&["P2", "SW2", "SWB", "SW4", "MCU4"]), p(&["P2", "SW2", "SWA", "SWB", "SW4", "MCU4"])],
            pefs: vec![port("SWB", "SW4")],
        },
    ];
    let mut flows = Vec::new();
    let mut placements = Vec::new();
    let mut edge_set: BTreeSet<(String, String)> = BTreeSet::new();
    for prof in profiles() {
        for r in &routes {
            let id = format!("{}:{}->{}", prof.name, r.from, r.to.join("+"));
            let mut dag: BTreeSet<(String, String)> = BTreeSet::new();
            for path in &r.paths {
                for w in path.windows(2) {
                    dag.insert((w[0].clone(), w[1].clone()));
                }
            }
            edge_set.extend(dag.iter().cloned());
            let source = r.paths[0][0].clone();
            let destinations: Vec<String> =
                r.to.iter()
                    .map(|d| {
                        r.paths
                            .iter()
                            .flat_map(|p| p.last())
                            .find(|l| l.ends_with(&format!("->{d}")))
                            .expect("route reaches destination")
                            .clone()
                    })
                    .collect();
            flows.push(FlowDoc {
                id: id.clone(),
                source,
                destinations,
                edges: dag.into_iter().collect(),
                arrival: ConcaveCurve::token_bucket(qi(prof.rate), qi(prof.burst)),
                lmin: qi(prof.lmin),
                lmax: qi(prof.lmax),
                deadline: Some(DeadlineDoc::All(prof.deadline.clone())),
            });
            for v in &r.pefs {
                placements.push(placement(PlacementKind::Pef, v, std::slice::from_ref(&id)));
            }
        }
    }
    let edges = edge_set.iter().map(|(a, b)| edge(a, b)).collect();
    debug_assert!(edge_set.iter().all(|(a, b)| ports.contains(a) && ports.contains(b)));
    NetworkDoc {
        vertices,
        edges,
        flows,
        placements,
        note: Some("automotive-shaped topology; traffic profiles are placeholders, not measured values".to_string()),
    }
}

/// Random feed-forward network: a layered grid where each redounded flow
/// splits into two vertex-disjoint branches that merge at a PEF, and other
/// flows follow single paths. Service rates are sized for stability.
pub fn random_feedforward_network<R: Rng>(rng: &mut R) -> NetworkDoc {
    let layers = rng.gen_range(3..=6usize);
    let width = rng.gen_range(2..=4usize);
    let name = |l: usize, i: usize| format!("v{l}_{i}");
    let mut flows: Vec<FlowDoc> = Vec::new();
    let mut placements = Vec::new();
    let mut load: BTreeMap<String, Rational> = BTreeMap::new();
    let n_flows = rng.gen_range(2..=6usize);
    for k in 0..n_flows {
        let id = format!("f{k}");
        let r = qi(rng.gen_range(1..=3));
        let b = qi(rng.gen_range(1..=6));
        let arrival = if rng.gen_bool(0.3) {
            let peak = &r + qi(rng.gen_range(1..=3));
            ConcaveCurve::from_segments(vec![
                TokenBucket::new(peak, qi(1)).expect("valid"),
                TokenBucket::new(r.clone(), &b + qi(2)).expect("valid"),
            ])
            .expect("nonempty")
        } else {
            ConcaveCurve::token_bucket(r.clone(), b)
        };
        let mut dag: BTreeSet<(String, String)> = BTreeSet::new();
        let mut copies: BTreeMap<String, i64> = BTreeMap::new();
        let redounded = k == 0 || rng.gen_bool(0.6);
        let start = rng.gen_range(0..layers - 2);
        let source = name(start, rng.gen_range(0..width));
        *copies.entry(source.clone()).or_default() += 1;
        let end;
        if redounded {
            let merge_layer = rng.gen_range(start + 2..layers);
            let mut cols: Vec<usize> = (0..width).collect();
            let mut prev = [source.clone(), source.clone()];
            for l in start + 1..merge_layer {
                cols.shuffle(rng);
                for (branch, p) in prev.iter_mut().enumerate() {
                    let v = name(l, cols[branch]);
                    dag.insert((p.clone(), v.clone()));
                    *copies.entry(v.clone()).or_default() += 1;
                    *p = v;
                }
            }
            let merge = name(merge_layer, rng.gen_range(0..width));
            for p in &prev {
                dag.insert((p.clone(), merge.clone()));
            }
            *copies.entry(merge.clone()).or_default() += 2;
            placements.push(placement(PlacementKind::Pef, &merge, std::slice::from_ref(&id)));
            end = (merge_layer, merge);
        } else {
            end = (start, source.clone());
        }
        let (mut layer, mut at) = end;
        let stop = rng.gen_range(layer..layers);
        while layer < stop {
            layer += 1;
            let v = name(layer, rng.gen_range(0..width));
            dag.insert((at.clone(), v.clone()));
            *copies.entry(v.clone()).or_default() += 1;
            at = v;
        }
        for (v, c) in copies {
            // Doubled: the intuitive model keeps both copies past the merge.
            *load.entry(v).or_insert_with(Rational::zero) += &r * qi(2 * c);
        }
        flows.push(FlowDoc {
            id,
            source,
            destinations: vec![at],
            edges: dag.into_iter().collect(),
            arrival,
            lmin: qi(1),
            lmax: qi(1),
            deadline: None,
        });
    }
    let mut vertices = Vec::new();
    let mut edges = Vec::new();
    for l in 0..layers {
        for i in 0..width {
            let id = name(l, i);
            let needed = load.get(&id).cloned().unwrap_or_else(Rational::zero);
            let rate = needed + qi(rng.gen_range(1..=8));
            let latency = q(rng.gen_range(0..=4), 2);
            let tmin = qi(rng.gen_range(0..=3));
            let tmax = &tmin + qi(rng.gen_range(0..=2));
            vertices.push(vertex(&id, Some(rate_latency(rate, latency)), (tmin, tmax)));
            if l + 1 < layers {
                for j in 0..width {
                    edges.push(edge(&id, &name(l + 1, j)));
                }
            }
        }
    }
    NetworkDoc { vertices, edges, flows, placements, note: Some("random feed-forward network".to_string()) }
}
