//! Scenario builders: the two-path toy trajectories, worst-case trajectories
//! that attain the elimination output burst, and adversarial inputs that
//! make an interleaved regulator after elimination diverge.

use std::collections::BTreeMap;

use rand::Rng;

use super::{FlowDecl, NetworkLink, PathDoc, PipelineDoc, PofDoc, RegulatorDoc, Scenario, UnitDoc};
use crate::corpus::{toy_network, ToyVariant};
use crate::minplus::{ConcaveCurve, TokenBucket};
use crate::rational::Rational;
use crate::redundancy::pef_output_curve_parallel;
use crate::regulators::ir_q_min;
use crate::topology::{LatencyDoc, NetworkDoc, PathDelayBounds, RegulatorMode};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GeneratorError {
    #[error("rate and burst must be positive")]
    NonPositiveCurve,
    #[error("delay bounds must satisfy 0 ≤ d ≤ D")]
    BadBounds,
    #[error("after ordering by upper bound, the first path has the larger lower bound")]
    CrossedBounds,
    #[error("both paths have the same constant delay; nothing can be reordered")]
    NoJitter,
    #[error("q = {q} is below the minimum {q_min}")]
    TooFewFlows { q: u64, q_min: u64 },
}

/// One unit with its route: `(time, size, path index, delay)`.
type Planned = (Rational, Rational, usize, Rational);

fn r(n: i64) -> Rational {
    Rational::from_integer(n)
}

fn latency(min: &Rational, max: &Rational) -> LatencyDoc {
    LatencyDoc { min: min.clone(), max: max.clone() }
}

/// Builds a two-path scenario where each unit travels on one path only.
fn two_path_scenario(
    note: String,
    flows: BTreeMap<String, FlowDecl>,
    planned: Vec<(String, Planned)>,
    bounds: [(&Rational, &Rational); 2],
    pipeline: PipelineDoc,
) -> Scenario {
    let mut planned = planned;
    planned.sort_by(|a, b| a.1 .0.cmp(&b.1 .0));
    let names = ["P1", "P2"];
    let mut schedules: BTreeMap<String, BTreeMap<u64, Option<Rational>>> =
        names.iter().map(|n| (n.to_string(), BTreeMap::new())).collect();
    let mut units = Vec::with_capacity(planned.len());
    for (i, (flow, (time, size, path, delay))) in planned.into_iter().enumerate() {
        let id = i as u64 + 1;
        for (p, name) in names.iter().enumerate() {
            let entry = (p == path).then(|| delay.clone());
            schedules.get_mut(*name).expect("declared").insert(id, entry);
        }
        units.push(UnitDoc { id, flow, time, size });
    }
    let allow_zero_size = units.iter().any(|u| u.size.is_zero());
    Scenario {
        note: Some(note),
        flows,
        units,
        paths: names
            .iter()
            .zip(bounds)
            .map(|(n, (lo, hi))| PathDoc { name: n.to_string(), delay: latency(lo, hi), fifo: false })
            .collect(),
        schedules,
        pipeline,
        allow_zero_size,
        network: None,
    }
}

// ---------------------------------------------------------------------------
// Two-path toy: γ(1,1) source, units 1..14 at t = k, paths C ∈ [0,1] and
// D ∈ [6,7], C declared first.

/// A bundled scenario with the network it exercises, if any.
#[derive(Debug, Clone)]
pub struct Bundled {
    pub name: String,
    pub scenario: Scenario,
    pub network: Option<(String, NetworkDoc)>,
}

fn toy_scenario(
    note: &str,
    c: impl Fn(i64) -> Option<i64>,
    d: impl Fn(i64) -> Option<i64>,
    pipeline: PipelineDoc,
) -> Scenario {
    let ks = 1..=14i64;
    let schedule = |f: &dyn Fn(i64) -> Option<i64>| ks.clone().map(|k| (k as u64, f(k).map(r))).collect();
    let g11 = ConcaveCurve::token_bucket(r(1), r(1));
    Scenario {
        note: Some(note.to_string()),
        flows: BTreeMap::from([("f".to_string(), FlowDecl { arrival: g11, lmin: Some(r(1)) })]),
        units: ks.clone().map(|k| UnitDoc { id: k as u64, flow: "f".into(), time: r(k), size: r(1) }).collect(),
        paths: vec![
            PathDoc { name: "C".into(), delay: latency(&r(0), &r(1)), fifo: false },
            PathDoc { name: "D".into(), delay: latency(&r(6), &r(7)), fifo: false },
        ],
        schedules: BTreeMap::from([("C".to_string(), schedule(&c)), ("D".to_string(), schedule(&d))]),
        pipeline,
        allow_zero_size: false,
        network: Some(NetworkLink { flow: "f".into(), destination: "F".into() }),
    }
}

fn toy_pof() -> Option<PofDoc> {
    Some(PofDoc { timeout: Some(r(6)), per_flow: true })
}

fn toy_pfr() -> Option<RegulatorDoc> {
    Some(RegulatorDoc {
        kind: RegulatorMode::PerFlow,
        shaping: BTreeMap::from([("f".to_string(), ConcaveCurve::token_bucket(r(1), r(1)))]),
    })
}

/// C drops units 1..6; D is late for the first unit only.
fn fast_then_zero(k: i64) -> Option<i64> {
    match k {
        ..=6 => None,
        7 => Some(1),
        _ => Some(0),
    }
}

/// Elimination only: D forwards everything at 7, C takes over from unit 7
/// at delay 1. Output rate doubles; unit 6 leaves 5 after unit 7.
pub fn toy_doubled_rate() -> Scenario {
    toy_scenario("doubled rate after elimination", |k| (k >= 7).then_some(1), |_| Some(7), PipelineDoc::default())
}

/// Elimination only: four units leave at t = 8 and unit 6 is 4 late.
pub fn toy_burst() -> Scenario {
    toy_scenario(
        "burst of 4 and RTO 4 after elimination",
        fast_then_zero,
        |k| Some(if k == 1 { 7 } else { 6 }),
        PipelineDoc::default(),
    )
}

/// The burst above restored by an ordering function with timeout 6.
pub fn toy_burst_ordered() -> Scenario {
    toy_scenario(
        "ordering with timeout 6 after elimination",
        fast_then_zero,
        |k| Some(if k == 1 { 7 } else { 6 }),
        PipelineDoc { pef: true, pof: toy_pof(), regulator: None },
    )
}

/// Per-flow regulation right after elimination: unit 6 waits 14.
pub fn toy_regulated() -> Scenario {
    toy_scenario(
        "per-flow regulator after elimination",
        fast_then_zero,
        |_| Some(7),
        PipelineDoc { pef: true, pof: None, regulator: toy_pfr() },
    )
}

/// Same trajectory through ordering then regulation: every delay is 7.
pub fn toy_ordered_regulated() -> Scenario {
    toy_scenario(
        "ordering then per-flow regulation",
        fast_then_zero,
        |_| Some(7),
        PipelineDoc { pef: true, pof: toy_pof(), regulator: toy_pfr() },
    )
}

/// Unit 1 lost on both paths: the ordering function waits for its timeout
/// and delays reach 13.
pub fn toy_lossy_ordered_regulated() -> Scenario {
    toy_scenario(
        "lost unit ahead of ordering and regulation",
        |k| (k >= 9).then_some(0),
        |k| (k >= 2).then_some(7),
        PipelineDoc { pef: true, pof: toy_pof(), regulator: toy_pfr() },
    )
}

/// Two paths with the same constant delay: elimination changes nothing.
pub fn zero_jitter() -> Scenario {
    let mut s = toy_scenario("two identical constant-delay paths", |_| Some(3), |_| Some(3), PipelineDoc::default());
    for p in &mut s.paths {
        p.delay = latency(&r(3), &r(3));
        p.fifo = true;
    }
    s.network = None;
    s
}

// ---------------------------------------------------------------------------
// Worst-case elimination output burst.

/// A γ(r,b) source split over two paths with delays in `[d1,D1]` and
/// `[d2,D2]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TightnessParams {
    pub rate: Rational,
    pub burst: Rational,
    pub d1: Rational,
    pub big_d1: Rational,
    pub d2: Rational,
    pub big_d2: Rational,
}

#[derive(Debug, Clone)]
pub struct TightnessCase {
    pub scenario: Scenario,
    /// Output arrival curve of the elimination function.
    pub curve: ConcaveCurve,
    /// Size and instant of the simultaneous burst.
    pub burst: Rational,
    pub burst_instant: Rational,
    /// Closed window `[burst_instant, end]` and the data it carries, when the
    /// output curve has a rate-`2r` piece.
    pub breakpoint: Option<(Rational, Rational)>,
}

impl TightnessParams {
    /// Orders the paths so that `D1 ≤ D2`.
    fn normalized(&self) -> Result<TightnessParams, GeneratorError> {
        if !self.rate.is_positive() || !self.burst.is_positive() {
            return Err(GeneratorError::NonPositiveCurve);
        }
        if self.d1.is_negative() || self.d2.is_negative() || self.d1 > self.big_d1 || self.d2 > self.big_d2 {
            return Err(GeneratorError::BadBounds);
        }
        let mut p = self.clone();
        if p.big_d1 > p.big_d2 {
            std::mem::swap(&mut p.d1, &mut p.d2);
            std::mem::swap(&mut p.big_d1, &mut p.big_d2);
        }
        if p.d1 > p.d2 {
            return Err(GeneratorError::CrossedBounds);
        }
        Ok(p)
    }
}

/// Units of size `b` every `b/r` starting at `start`, the last one at `end`
/// carrying whatever keeps the cumulative size on `b + r·t`.
fn on_envelope(
    p: &TightnessParams,
    start: &Rational,
    end: &Rational,
    cumulative: &mut Rational,
) -> Vec<(Rational, Rational)> {
    let spacing = &p.burst / &p.rate;
    let mut out = Vec::new();
    let mut t = start.clone();
    loop {
        let last = t >= *end;
        let at = if last { end.clone() } else { t.clone() };
        let size = (&p.burst + &p.rate * &at) - &*cumulative;
        if size.is_positive() {
            *cumulative += &size;
            out.push((at, size));
        }
        if last {
            return out;
        }
        t = &t + &spacing;
    }
}

/// Trajectory whose elimination output carries the curve's burst at one
/// instant (and, when the curve has a rate-`2r` piece, follows it up to the
/// breakpoint). Every unit uses one path only.
pub fn tightness_scenario(params: &TightnessParams) -> Result<TightnessCase, GeneratorError> {
    let p = params.normalized()?;
    let (rate, b) = (&p.rate, &p.burst);
    let spacing = b / rate;
    let ceil_count = |x: Rational| -> i64 {
        let c: i64 = x.ceil().try_into().expect("small counts");
        c.max(1)
    };
    let mut planned: Vec<Planned> = Vec::new();
    let gap = &p.d2 - &p.big_d1;
    let exit = p.big_d2.clone();
    let breakpoint;
    if gap >= spacing {
        // Initial units, burst units and rate-2r units on both paths.
        let chi = |lo: &Rational, hi: &Rational| ceil_count(rate * (hi - lo) / b);
        let (chi1, chi2) = (chi(&p.d1, &p.big_d1), chi(&p.d2, &p.big_d2));
        let psi = ceil_count((rate * &gap - b) / b);
        let shift1 = &p.big_d2 - &p.big_d1;
        planned.push((r(0), b.clone(), 1, exit.clone()));
        planned.push((shift1.clone(), b.clone(), 0, p.big_d1.clone()));
        for k in 1..chi2 {
            let t = &spacing * r(k);
            planned.push((t.clone(), b.clone(), 1, &exit - &t));
        }
        let last2 = rate * (&p.big_d2 - &p.d2) - b * r(chi2 - 1);
        planned.push((&p.big_d2 - &p.d2, last2, 1, p.d2.clone()));
        for k in 1..chi1 {
            let t = &shift1 + &spacing * r(k);
            planned.push((t.clone(), b.clone(), 0, &exit - &t));
        }
        let last1 = rate * (&p.big_d1 - &p.d1) - b * r(chi1 - 1);
        planned.push((&p.big_d2 - &p.d1, last1, 0, p.d1.clone()));
        let lag = &p.d2 - &p.d1;
        let mut last_s1 = None;
        for k in 1..=psi {
            let (t2, size) = if k < psi {
                (&p.big_d2 - &p.d2 + &spacing * r(k), b.clone())
            } else {
                (&shift1 - &spacing, rate * &gap - b * r(psi))
            };
            let t1 = &t2 + &lag;
            planned.push((t2, size.clone(), 1, p.d2.clone()));
            planned.push((t1.clone(), size, 0, p.d1.clone()));
            last_s1 = Some(t1);
        }
        let tail_start = last_s1.expect("psi ≥ 1");
        for n in 1..=4 {
            planned.push((&tail_start + &spacing * r(n), b.clone(), 0, p.d1.clone()));
        }
        let t_star = &gap - &spacing;
        let carried = rate * (&p.big_d2 - &p.d1 + &gap);
        breakpoint = Some((&exit + &t_star, carried));
    } else {
        // The paths' generation windows [0, D2−d2] and [D2−D1, D2−d1] are
        // separated by less than b/r: fill both along the envelope.
        let mut cumulative = Rational::zero();
        for (t, size) in on_envelope(&p, &r(0), &(&p.big_d2 - &p.d2), &mut cumulative) {
            let delay = &exit - &t;
            planned.push((t, size, 1, delay));
        }
        let start1 = (&p.big_d2 - &p.big_d1).max(&p.big_d2 - &p.d2);
        for (t, size) in on_envelope(&p, &start1, &(&p.big_d2 - &p.d1), &mut cumulative) {
            let delay = &exit - &t;
            planned.push((t, size, 0, delay));
        }
        breakpoint = None;
    }
    let tb = ConcaveCurve::token_bucket(rate.clone(), b.clone());
    let branches =
        [PathDelayBounds::new(p.d1.clone(), p.big_d1.clone()), PathDelayBounds::new(p.d2.clone(), p.big_d2.clone())];
    let curve = pef_output_curve_parallel(&tb, &branches).expect("two branches");
    let burst = curve.burst().clone();
    let flows = BTreeMap::from([("f".to_string(), FlowDecl { arrival: tb, lmin: None })]);
    let scenario = two_path_scenario(
        format!(
            "worst-case elimination burst: r={} b={} paths [{},{}] and [{},{}]",
            p.rate, p.burst, p.d1, p.big_d1, p.d2, p.big_d2
        ),
        flows,
        planned.into_iter().map(|u| ("f".to_string(), u)).collect(),
        [(&p.d1, &p.big_d1), (&p.d2, &p.big_d2)],
        PipelineDoc::default(),
    );
    Ok(TightnessCase { scenario, curve, burst, burst_instant: exit, breakpoint })
}

fn small_rational<R: Rng>(rng: &mut R, max_num: i64, den: i64) -> Rational {
    Rational::new(rng.gen_range(0..=max_num), den)
}

/// Random parameters. `separated` asks for `d2 − D1 ≥ b/r`.
pub fn random_tightness_params<R: Rng>(rng: &mut R, separated: bool) -> TightnessParams {
    let rate = Rational::new(rng.gen_range(1..=4), rng.gen_range(1..=2));
    let burst = Rational::new(rng.gen_range(1..=6), rng.gen_range(1..=2));
    let d1 = small_rational(rng, 8, 2);
    let big_d1 = &d1 + small_rational(rng, 10, 2);
    let spacing = &burst / &rate;
    let d2 = if separated {
        &big_d1 + &spacing + small_rational(rng, 8, 2)
    } else {
        // Anywhere from d1 up to just below D1 + b/r.
        let span = &big_d1 + &spacing - &d1;
        let frac = Rational::new(rng.gen_range(0..8), 8);
        &d1 + span * frac
    };
    let big_d2 = (&d2 + small_rational(rng, 10, 2)).max(big_d1.clone());
    TightnessParams { rate, burst, d1, big_d1, d2, big_d2 }
}

// ---------------------------------------------------------------------------
// Interleaved regulator after elimination, without ordering.

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdversarialParams {
    pub rate: Rational,
    pub burst: Rational,
    pub d1: Rational,
    pub big_d1: Rational,
    pub d2: Rational,
    pub big_d2: Rational,
    /// Number of flows; the smallest diverging count when `None`.
    pub flows: Option<u64>,
    /// Minimum number of periods to generate.
    pub periods: u64,
}

#[derive(Debug, Clone)]
pub struct AdversarialCase {
    pub scenario: Scenario,
    pub q: u64,
    pub q_min: u64,
    /// Constant delay of the path carrying the first unit of each pair.
    pub big_d: Rational,
    pub phi: Rational,
    /// Unit ids of the first flow's first units, one per period.
    pub tracked: Vec<u64>,
}

impl AdversarialCase {
    /// Lower bound on the regulator delay of the `k`-th tracked unit.
    pub fn delay_lower_bound(&self, k: u64) -> Rational {
        let b_over_r = {
            let tb =
                self.scenario.flows.values().next().expect("flows").arrival.as_token_bucket().expect("token bucket");
            &tb.burst / &tb.rate
        };
        -&self.big_d + Rational::from(k) * Rational::from(self.q) * (b_over_r - &self.phi)
    }
}

/// `q` token-bucket flows whose pairs of units are squeezed by the path delay
/// difference so that each period adds a fixed amount of regulator delay.
pub fn adversarial_scenario(params: &AdversarialParams) -> Result<AdversarialCase, GeneratorError> {
    let mut p = params.clone();
    if !p.rate.is_positive() || !p.burst.is_positive() {
        return Err(GeneratorError::NonPositiveCurve);
    }
    if p.d1.is_negative() || p.d2.is_negative() || p.d1 > p.big_d1 || p.d2 > p.big_d2 {
        return Err(GeneratorError::BadBounds);
    }
    if p.big_d1 > p.big_d2 {
        std::mem::swap(&mut p.d1, &mut p.d2);
        std::mem::swap(&mut p.big_d1, &mut p.big_d2);
    }
    let (rate, b) = (&p.rate, &p.burst);
    let spacing = b / rate;
    let tb = TokenBucket::new(rate.clone(), b.clone()).expect("positive");
    let q_min = ir_q_min(
        &tb,
        &PathDelayBounds::new(p.d1.clone(), p.big_d1.clone()),
        &PathDelayBounds::new(p.d2.clone(), p.big_d2.clone()),
    )
    .expect("positive burst");
    let q = p.flows.unwrap_or(q_min);
    if q < q_min {
        return Err(GeneratorError::TooFewFlows { q, q_min });
    }
    let qr = Rational::from(q);
    let two = r(2);
    // (J, big delay and its path, small delay and its path)
    let (j, big_d, big_path, small_d, small_path) = if p.big_d1 < p.d2 {
        (&p.d2 - &p.big_d1, p.d2.clone(), 1, p.big_d1.clone(), 0)
    } else if p.d2 < p.big_d1 {
        let j = (&(&qr - &two) * b / (&two * rate)).min(&p.big_d1 - &p.d2) / &two;
        let small = &p.big_d1 - &j;
        (j, p.big_d1.clone(), 0, small, 1)
    } else if p.d2 < p.big_d2 {
        let raised = (&p.d2 + (&p.big_d2).min(&(&p.big_d1 + &spacing / &two))) / &two;
        (&raised - &p.big_d1, raised, 1, p.big_d1.clone(), 0)
    } else if p.d1 < p.big_d1 {
        let lowered = (&p.big_d1 + (&p.d1).max(&(&p.big_d1 - &spacing / &two))) / &two;
        (&p.d2 - &lowered, p.d2.clone(), 1, lowered, 0)
    } else {
        return Err(GeneratorError::NoJitter);
    };
    let q2 = &qr - &two;
    let eps = (&spacing - &two * &j / &q2).min(j.clone()) / &two;
    let inter = (&qr * &j / &q2).max(spacing.clone());
    let phi = &inter - &j + &eps;
    let tau = &qr * &phi;
    let gain = &qr * (&spacing - &phi);
    // Enough periods for the lower bound to pass 10·D.
    let needed = (r(11) * &big_d / &gain).ceil_u64().unwrap_or(0) + 2;
    let periods = p.periods.max(needed);

    let mut planned = Vec::new();
    let mut tracked_times = Vec::new();
    for i in 0..q {
        let x = &spacing + Rational::from(i) * &phi;
        let flow = format!("f{}", i + 1);
        for k in 0..periods {
            let t1 = &x + Rational::from(k) * &tau;
            if i == 0 {
                tracked_times.push(t1.clone());
            }
            planned.push((flow.clone(), (t1.clone(), b.clone(), big_path, big_d.clone())));
            planned.push((flow.clone(), (&t1 + &inter, b.clone(), small_path, small_d.clone())));
        }
    }
    let curve = ConcaveCurve::token_bucket(rate.clone(), b.clone());
    let flows: BTreeMap<String, FlowDecl> =
        (1..=q).map(|i| (format!("f{i}"), FlowDecl { arrival: curve.clone(), lmin: Some(b.clone()) })).collect();
    let shaping = flows.keys().map(|f| (f.clone(), curve.clone())).collect();
    let scenario = two_path_scenario(
        format!(
            "interleaved regulator after elimination: q={q} r={} b={} paths [{},{}] and [{},{}]",
            p.rate, p.burst, p.d1, p.big_d1, p.d2, p.big_d2
        ),
        flows,
        planned,
        [(&p.d1, &p.big_d1), (&p.d2, &p.big_d2)],
        PipelineDoc {
            pef: true,
            pof: None,
            regulator: Some(RegulatorDoc { kind: RegulatorMode::Interleaved, shaping }),
        },
    );
    let tracked = tracked_times
        .iter()
        .map(|t| scenario.units.iter().find(|u| u.flow == "f1" && &u.time == t).expect("generated").id)
        .collect();
    Ok(AdversarialCase { scenario, q, q_min, big_d, phi, tracked })
}

/// Random parameters covering the three relative positions of `d2` and `D1`.
pub fn random_adversarial_params<R: Rng>(rng: &mut R) -> AdversarialParams {
    let rate = r(rng.gen_range(1..=3));
    let burst = r(rng.gen_range(1..=4));
    let d1 = r(rng.gen_range(0..=3));
    let big_d1 = &d1 + r(rng.gen_range(1..=4));
    let d2 = match rng.gen_range(0..3) {
        0 => &big_d1 + r(rng.gen_range(1..=4)),
        1 => &d1 + Rational::new(rng.gen_range(0..4), 4) * (&big_d1 - &d1),
        _ => big_d1.clone(),
    };
    let big_d2 = (&d2 + r(rng.gen_range(1..=4))).max(big_d1.clone());
    AdversarialParams { rate, burst, d1, big_d1, d2, big_d2, flows: None, periods: 51 }
}

/// The bundled scenario corpus, with the network each one exercises.
pub fn bundled() -> Vec<Bundled> {
    let toy = |name: &str, variant: ToyVariant| Some((name.to_string(), toy_network(variant)));
    let mut out = vec![
        Bundled {
            name: "toy-doubled-rate".into(),
            scenario: toy_doubled_rate(),
            network: toy("toy-pef", ToyVariant::Pef),
        },
        Bundled { name: "toy-burst".into(), scenario: toy_burst(), network: toy("toy-pef", ToyVariant::Pef) },
        Bundled {
            name: "toy-burst-ordered".into(),
            scenario: toy_burst_ordered(),
            network: toy("toy-pef-pof", ToyVariant::PefPof),
        },
        Bundled {
            name: "toy-regulated".into(),
            scenario: toy_regulated(),
            network: toy("toy-pef-pfr", ToyVariant::PefPfr),
        },
        Bundled {
            name: "toy-ordered-regulated".into(),
            scenario: toy_ordered_regulated(),
            network: toy("toy-pef-pof-pfr", ToyVariant::PefPofPfr),
        },
        Bundled {
            name: "toy-lossy-ordered-regulated".into(),
            scenario: toy_lossy_ordered_regulated(),
            network: toy("toy-pef-pof-pfr", ToyVariant::PefPofPfr),
        },
        Bundled { name: "zero-jitter".into(), scenario: zero_jitter(), network: None },
    ];
    let tight = [
        TightnessParams { rate: r(1), burst: r(1), d1: r(0), big_d1: r(1), d2: r(6), big_d2: r(7) },
        TightnessParams { rate: r(2), burst: r(3), d1: r(1), big_d1: r(4), d2: r(2), big_d2: r(5) },
        TightnessParams { rate: r(1), burst: r(2), d1: r(2), big_d1: r(2), d2: r(5), big_d2: r(5) },
    ];
    for (i, params) in tight.iter().enumerate() {
        let case = tightness_scenario(params).expect("valid bundled parameters");
        out.push(Bundled { name: format!("tightness-{}", i + 1), scenario: case.scenario, network: None });
    }
    let adversarial = [
        AdversarialParams {
            rate: r(1),
            burst: r(1),
            d1: r(0),
            big_d1: r(1),
            d2: r(6),
            big_d2: r(7),
            flows: None,
            periods: 51,
        },
        AdversarialParams {
            rate: r(1),
            burst: r(2),
            d1: r(1),
            big_d1: r(4),
            d2: r(2),
            big_d2: r(6),
            flows: None,
            periods: 51,
        },
        AdversarialParams {
            rate: r(2),
            burst: r(1),
            d1: r(0),
            big_d1: r(3),
            d2: r(3),
            big_d2: r(5),
            flows: None,
            periods: 51,
        },
    ];
    for (i, params) in adversarial.iter().enumerate() {
        let case = adversarial_scenario(params).expect("valid bundled parameters");
        out.push(Bundled { name: format!("ir-divergence-{}", i + 1), scenario: case.scenario, network: None });
    }
    out
}
