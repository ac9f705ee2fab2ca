use super::generators::*;
use super::*;
use crate::rational::qi;
use crate::redundancy::pef_output_curve_parallel;
use crate::topology::PathDelayBounds;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn times_of(run: &SimRun, point: &str) -> Vec<(u64, Rational)> {
    run.at(point).unwrap().iter().map(|o| (run.units[o.unit].id, o.time.clone())).collect()
}

fn delay_of(run: &SimRun, id: u64) -> Rational {
    run.delays()[run.unit_index(id).unwrap()].clone().unwrap()
}

fn g(r: i64, b: i64) -> ConcaveCurve {
    ConcaveCurve::token_bucket(qi(r), qi(b))
}

#[test]
fn doubled_rate_after_elimination() {
    let run = run_scenario(&toy_doubled_rate()).unwrap();
    for t in 8..=13 {
        assert_eq!(run.at("pef").unwrap().iter().filter(|o| o.time == qi(t)).count(), 2);
    }
    let violation = run.compliance("pef", "f", &g(1, 1)).unwrap_err();
    assert_eq!((violation.start, violation.end, violation.amount), (qi(8), qi(8), qi(2)));
    assert_eq!(run.reordering("pef", "f").rto, qi(5));
}

#[test]
fn four_units_at_once_and_rto_four() {
    let run = run_scenario(&toy_burst()).unwrap();
    assert_eq!(run.max_instant_burst("pef", Some("f")), Some((qi(4), qi(8))));
    let at8: Vec<u64> = times_of(&run, "pef").into_iter().filter(|(_, t)| *t == qi(8)).map(|(id, _)| id).collect();
    // The first-declared path wins ties.
    assert_eq!(at8, vec![7, 8, 1, 2]);
    assert_eq!(run.reordering("pef", "f").rto, qi(4));
    let curve =
        pef_output_curve_parallel(&g(1, 1), &[PathDelayBounds::new(qi(0), qi(1)), PathDelayBounds::new(qi(6), qi(7))])
            .unwrap();
    assert!(run.compliance("pef", "f", &curve).is_ok());
    assert!(run.lossless);
}

#[test]
fn ordering_releases_seven_at_twelve() {
    let run = run_scenario(&toy_burst_ordered()).unwrap();
    assert_eq!(run.at("pof").unwrap().iter().filter(|o| o.time == qi(12)).count(), 7);
    assert_eq!(run.max_delay(), Some(qi(7)));
    assert!(run.compliance("pof", "f", &g(1, 8)).is_ok());
    assert_eq!(run.reordering("pof", "f").rto, qi(0));
}

#[test]
fn regulator_after_elimination_delays_unit_six_by_fourteen() {
    let run = run_scenario(&toy_regulated()).unwrap();
    assert_eq!(delay_of(&run, 6), qi(14));
    assert_eq!(run.max_delay(), Some(qi(14)));
    assert_eq!(run.reordering("reg", "f").rto, qi(12));
    assert!(run.compliance("reg", "f", &g(1, 1)).is_ok());
}

#[test]
fn ordering_before_regulation_keeps_delays_at_seven() {
    let run = run_scenario(&toy_ordered_regulated()).unwrap();
    assert!(run.delays().iter().all(|d| d.as_ref() == Some(&qi(7))));
}

#[test]
fn lost_unit_holds_the_ordering_until_its_timeout() {
    let s = toy_lossy_ordered_regulated();
    assert!(!s.is_lossless());
    let run = run_scenario(&s).unwrap();
    assert!(run.delays()[0].is_none());
    // Arrivals at 15 are handled before the timeouts expiring at 15.
    assert!(run.at("pof").unwrap().iter().all(|o| o.time == qi(15)));
    assert_eq!(run.max_delay(), Some(qi(13)));
    assert_eq!(delay_of(&run, 14), qi(13));
}

#[test]
fn identical_paths_change_nothing() {
    let run = run_scenario(&zero_jitter()).unwrap();
    assert!(run.delays().iter().all(|d| d.as_ref() == Some(&qi(3))));
    assert_eq!(run.reordering("pef", "f").rto, qi(0));
    assert!(run.compliance("pef", "f", &g(1, 1)).is_ok());
}

#[test]
fn infinite_timeout_waits_forever() {
    let mut s = toy_lossy_ordered_regulated();
    s.pipeline.pof = Some(PofDoc { timeout: None, per_flow: true });
    s.pipeline.regulator = None;
    let run = run_scenario(&s).unwrap();
    assert!(run.at("pof").unwrap().is_empty());
}

#[test]
fn interleaved_regulator_blocks_behind_its_head() {
    // f sends two units at once against γ(1,1); g's unit queues behind them.
    let unit = |id, flow: &str| UnitDoc { id, flow: flow.into(), time: qi(1), size: qi(1) };
    let shaping: BTreeMap<String, ConcaveCurve> = [("f".to_string(), g(1, 1)), ("g".to_string(), g(1, 1))].into();
    let mut s = Scenario {
        note: None,
        flows: [
            ("f".to_string(), FlowDecl { arrival: g(1, 2), lmin: None }),
            ("g".to_string(), FlowDecl { arrival: g(1, 1), lmin: None }),
        ]
        .into(),
        units: vec![unit(1, "f"), unit(2, "f"), unit(3, "g")],
        paths: vec![PathDoc { name: "A".into(), delay: LatencyDoc { min: qi(0), max: qi(0) }, fifo: true }],
        schedules: [("A".to_string(), (1..=3).map(|i| (i, Some(qi(0)))).collect())].into(),
        pipeline: PipelineDoc {
            pef: false,
            pof: None,
            regulator: Some(RegulatorDoc { kind: RegulatorMode::PerFlow, shaping: shaping.clone() }),
        },
        allow_zero_size: false,
        network: None,
    };
    let pfr = run_scenario(&s).unwrap();
    assert_eq!(pfr.delays(), vec![Some(qi(0)), Some(qi(1)), Some(qi(0))]);
    s.pipeline.regulator = Some(RegulatorDoc { kind: RegulatorMode::Interleaved, shaping });
    let ir = run_scenario(&s).unwrap();
    assert_eq!(ir.delays(), vec![Some(qi(0)), Some(qi(1)), Some(qi(1))]);
}

#[test]
fn rejects_invalid_scenarios() {
    let mut s = toy_burst();
    s.units[2].size = qi(0);
    let err = Scenario::from_json(&s.to_json()).unwrap_err();
    assert!(matches!(err, SimError::Invalid { ref path, .. } if path == "$.units[2].size"), "{err}");

    let mut s = toy_burst();
    s.schedules.get_mut("C").unwrap().remove(&3);
    assert!(matches!(s.validate(), Err(SimError::Invalid { ref path, .. }) if path == "$.schedules.C"));

    let mut s = toy_burst();
    s.schedules.get_mut("D").unwrap().insert(3, Some(qi(9)));
    assert!(matches!(run_scenario(&s), Err(SimError::DelayOutOfBounds { unit: 3, .. })));

    let mut s = toy_burst();
    s.paths[1].fifo = true;
    s.paths[1].delay.max = qi(9);
    s.schedules.get_mut("D").unwrap().insert(1, Some(qi(9)));
    assert!(matches!(run_scenario(&s), Err(SimError::FifoViolation { .. })));

    let mut s = toy_regulated();
    s.units[0].size = qi(2);
    s.flows.get_mut("f").unwrap().arrival = g(1, 2);
    assert!(matches!(run_scenario(&s), Err(SimError::OversizedPacket { unit: 1, .. })));

    let err =
        Scenario::from_json(r#"{"flows": {}, "units": [], "paths": [], "schedules": {}, "bogus": 1}"#).unwrap_err();
    assert!(matches!(err, SimError::Invalid { ref path, .. } if path.starts_with('$')));

    let mut s = toy_burst();
    s.pipeline.pef = false;
    assert!(matches!(s.validate(), Err(SimError::Invalid { ref path, .. }) if path == "$.pipeline.pef"));
}

#[test]
fn json_and_trace_round_trip() {
    for b in bundled().into_iter().take(7) {
        let back = Scenario::from_json(&b.scenario.to_json()).unwrap();
        let (one, two) = (run_scenario(&b.scenario).unwrap(), run_scenario(&back).unwrap());
        assert_eq!(one.trace(), two.trace(), "{}", b.name);
    }
    let csv = run_scenario(&toy_burst()).unwrap().trace().to_csv();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some(TRACE_CSV_HEADER));
    assert_eq!(lines.next(), Some("1,in,1,f,1"));
    assert!(csv.contains("8,pef,7,f,1"));
}

fn assert_tight(case: &TightnessCase) {
    let run = run_scenario(&case.scenario).unwrap();
    let arrival = &case.scenario.flows["f"].arrival;
    assert!(run.compliance("in", "f", arrival).is_ok(), "{:?}", case.scenario.note);
    assert!(run.compliance("pef", "f", &case.curve).is_ok(), "{:?}", case.scenario.note);
    assert_eq!(
        run.max_instant_burst("pef", Some("f")).map(|(s, _)| s),
        Some(case.burst.clone()),
        "{:?}",
        case.scenario.note
    );
    let at_instant: Rational = run
        .at("pef")
        .unwrap()
        .iter()
        .filter(|o| o.time == case.burst_instant)
        .map(|o| run.units[o.unit].size.clone())
        .sum();
    assert_eq!(at_instant, case.burst);
    if let Some((end, carried)) = &case.breakpoint {
        let window: Rational = run
            .at("pef")
            .unwrap()
            .iter()
            .filter(|o| o.time >= case.burst_instant && o.time <= *end)
            .map(|o| run.units[o.unit].size.clone())
            .sum();
        assert_eq!(&window, carried);
        assert_eq!(&case.curve.eval_closed(&(end - &case.burst_instant)), carried);
    }
}

#[test]
fn tightness_on_the_toy_paths() {
    let case = tightness_scenario(&TightnessParams {
        rate: qi(1),
        burst: qi(1),
        d1: qi(0),
        big_d1: qi(1),
        d2: qi(6),
        big_d2: qi(7),
    })
    .unwrap();
    assert_eq!(case.burst, qi(4));
    assert_tight(&case);
}

#[test]
fn tightness_on_random_parameters() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for i in 0..40 {
        let params = random_tightness_params(&mut rng, i % 2 == 0);
        let case = tightness_scenario(&params).unwrap();
        let expected = if i % 2 == 0 {
            qi(2) * &params.burst + &params.rate * (&params.big_d1 - &params.d1 + &params.big_d2 - &params.d2)
        } else {
            case.burst.clone()
        };
        assert_eq!(case.burst, expected, "{params:?}");
        assert_tight(&case);
    }
}

#[test]
fn tightness_rejects_crossed_bounds() {
    let p = TightnessParams { rate: qi(1), burst: qi(1), d1: qi(3), big_d1: qi(4), d2: qi(1), big_d2: qi(5) };
    assert_eq!(tightness_scenario(&p).unwrap_err(), GeneratorError::CrossedBounds);
}

fn assert_diverges(case: &AdversarialCase) {
    let run = run_scenario(&case.scenario).unwrap();
    assert!(run.lossless);
    assert!(is_fifo_per_flow(&run, "pef"));
    for f in case.scenario.flows.keys() {
        assert!(run.compliance("in", f, &case.scenario.flows[f].arrival).is_ok());
    }
    let ir_delay = |id: u64| {
        let i = run.unit_index(id).unwrap();
        run.time_at("reg", i).unwrap() - run.time_at("pef", i).unwrap()
    };
    for k in 0..=50u64 {
        let d = ir_delay(case.tracked[k as usize]);
        assert!(d >= case.delay_lower_bound(k), "k={k}: {d} < {}", case.delay_lower_bound(k));
    }
    let last = ir_delay(*case.tracked.last().unwrap());
    assert!(last > qi(10) * &case.big_d, "{last}");
}

#[test]
fn interleaved_regulator_diverges_in_all_three_cases() {
    let base = AdversarialParams {
        rate: qi(1),
        burst: qi(1),
        d1: qi(0),
        big_d1: qi(1),
        d2: qi(6),
        big_d2: qi(7),
        flows: None,
        periods: 51,
    };
    let separated = adversarial_scenario(&base).unwrap();
    assert_eq!(separated.q_min, 13);
    assert_diverges(&separated);
    let overlapping =
        adversarial_scenario(&AdversarialParams { d1: qi(1), big_d1: qi(4), d2: qi(2), big_d2: qi(6), ..base.clone() })
            .unwrap();
    assert_eq!(overlapping.q, 3);
    assert_diverges(&overlapping);
    let touching =
        adversarial_scenario(&AdversarialParams { d1: qi(0), big_d1: qi(3), d2: qi(3), big_d2: qi(5), ..base.clone() })
            .unwrap();
    assert_diverges(&touching);
    let flat = AdversarialParams { d1: qi(2), big_d1: qi(2), d2: qi(2), big_d2: qi(2), ..base.clone() };
    assert_eq!(adversarial_scenario(&flat).unwrap_err(), GeneratorError::NoJitter);
    let few = AdversarialParams { flows: Some(4), ..base };
    assert_eq!(adversarial_scenario(&few).unwrap_err(), GeneratorError::TooFewFlows { q: 4, q_min: 13 });
}

#[test]
fn interleaved_regulator_diverges_on_random_parameters() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..5 {
        let params = random_adversarial_params(&mut rng);
        assert_diverges(&adversarial_scenario(&params).unwrap());
    }
}
