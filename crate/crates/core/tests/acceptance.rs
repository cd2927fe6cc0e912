//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero when a blocking one fails.

mod common;

use std::time::{Duration, Instant};

use hpn_core::dss::{
    analyze, initial_configuration, next_configurations, AnalysisReport, AnalysisRequest,
    Configuration, ExplorationMode, StopReason,
};
use hpn_core::fixtures::{
    case_a_scenario, case_b_scenario, case_c_scenario, case_study_net, example_scenario,
};
use hpn_core::scalar::parse_exact;
use hpn_core::{
    balances, simulate, solve_speeds, EventKind, Exact, HybridNet,
    Scalar, ScenarioConfig, Trace,
};

const EXAMPLE_VECTOR: [&str; 19] = [
    "4", "3", "5", "1", "3/2", "1", "1/2", "1/2", "1", "0", "1/2", "1", "1/2", "1/2", "1/2", "0",
    "1", "5/2", "1/2",
];
/// T1..T6, T8..T12 and T15..T18, the entries the published vector fixes
/// without relying on calibrated arcs.
const UNAMBIGUOUS: [usize; 15] = [1, 2, 3, 4, 5, 6, 8, 9, 10, 11, 12, 15, 16, 17, 18];

type Check = Result<String, String>;

struct Criterion {
    name: &'static str,
    blocking: bool,
    budget: Duration,
    run: fn() -> Check,
}

fn q(text: &str) -> Exact {
    parse_exact(text).unwrap()
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(value: f64, published: f64, rel: f64) -> bool {
    (value - published).abs() <= rel * published
}

fn exact_run(scenario: &ScenarioConfig) -> Result<Trace<Exact>, String> {
    simulate::<Exact>(&case_study_net(), scenario).map_err(|e| e.to_string())
}

fn delivered(trace: &Trace<Exact>) -> Result<Exact, String> {
    trace
        .outcome
        .delivered_at()
        .cloned()
        .ok_or_else(|| format!("not delivered: {:?}", trace.outcome))
}

fn delivery_check(scenario: &ScenarioConfig, exact: &str, published: f64) -> Result<Trace<Exact>, String> {
    let trace = exact_run(scenario)?;
    let at = delivered(&trace)?;
    ensure(at == q(exact), || format!("{}: delivered at {at}, expected {exact}", scenario.id))?;
    ensure(within(at.to_f64(), published, 0.005), || {
        format!("{}: {} not within 0.5% of {published}", scenario.id, at.to_f64())
    })?;
    Ok(trace)
}

fn example_speeds(net: &HybridNet) -> Result<hpn_core::SpeedVector<Exact>, String> {
    let marking = net.initial_marking().map(|v| Exact::from_f64(*v));
    solve_speeds(net, &marking).map_err(|e| e.to_string())
}

fn example_reproduction() -> Check {
    let net = case_study_net();
    let v = example_speeds(&net)?;
    for i in UNAMBIGUOUS {
        let id = format!("T{i}");
        let want = q(EXAMPLE_VECTOR[i - 1]);
        ensure(v.get(&id) == Some(&want), || format!("{id} = {:?}, expected {want}", v.get(&id)))?;
    }
    let b = balances(&net, &v);
    ensure(b.get("P4") == Some(&q("7/2")), || format!("balance P4 = {:?}", b.get("P4")))?;
    ensure(b.get("P5") == Some(&q("-7/2")), || format!("balance P5 = {:?}", b.get("P5")))?;
    delivery_check(&example_scenario(), "2000/7", 286.0)?;
    Ok("15 speeds exact, balances 7/2 and -7/2, delivery 2000/7".into())
}

fn case_a() -> Check {
    let trace = delivery_check(&case_a_scenario(), "6000/7", 857.0)?;
    let first = &trace.phases[0];
    ensure(first.end == q("2000/7"), || format!("first boundary at {}", first.end))?;
    ensure(within(first.end.to_f64(), 286.0, 0.005), || "boundary off".into())?;
    ensure(matches!(first.terminator.kind, EventKind::PlaceEmptied { .. }), || {
        format!("first phase ends with {:?}", first.terminator.kind)
    })?;
    Ok("boundary 2000/7, delivery 6000/7".into())
}

fn case_b() -> Check {
    delivery_check(&case_b_scenario(), "3000/7", 429.0)?;
    Ok("delivery 3000/7".into())
}

fn case_c() -> Check {
    let trace = delivery_check(&case_c_scenario(), "2000/7", 286.0)?;
    ensure(trace.phases.len() == 1, || format!("{} phases", trace.phases.len()))?;
    Ok("one phase, delivery 2000/7".into())
}

/// The configuration orders conflicts exactly as `scenario` does at every
/// place it overrides.
fn same_ordering(config: &Configuration, scenario: &ScenarioConfig) -> bool {
    let net = scenario.effective_net(&case_study_net());
    !config.policy_overrides.is_empty()
        && config.policy_overrides.iter().all(|mine| {
            net.policies
                .iter()
                .find(|p| p.place == mine.place)
                .is_some_and(|theirs| theirs == mine)
        })
}

fn analysis(deadline: f64, mode: ExplorationMode) -> Result<AnalysisReport, String> {
    let mut scenario = case_a_scenario();
    scenario.deadline = Some(deadline);
    analyze(&case_study_net(), &AnalysisRequest::new(scenario, mode))
        .map(|a| a.report)
        .map_err(|e| e.to_string())
}

fn dss_selection() -> Check {
    let r = analysis(500.0, ExplorationMode::HeuristicOnly)?;
    ensure(r.attempts.len() == 2 && !r.attempts[0].meets_deadline, || {
        format!("deadline 500: {} attempts", r.attempts.len())
    })?;
    ensure(same_ordering(&r.attempts[0].configuration, &case_a_scenario()), || {
        "deadline 500: first attempt is not Case A".into()
    })?;
    let sel = r.selected_attempt().ok_or("deadline 500: nothing selected")?;
    ensure(same_ordering(&sel.configuration, &case_b_scenario()), || {
        format!("deadline 500 selected {}", sel.configuration.summary())
    })?;

    let r = analysis(300.0, ExplorationMode::HeuristicOnly)?;
    let sel = r.selected_attempt().ok_or("deadline 300: nothing selected")?;
    ensure(same_ordering(&sel.configuration, &case_c_scenario()), || {
        format!("deadline 300 selected {}", sel.configuration.summary())
    })?;

    let r = analysis(100.0, ExplorationMode::HeuristicOnly)?;
    ensure(r.selected.is_none() && r.stopped_because == StopReason::Exhausted, || {
        format!("deadline 100: {:?} / {:?}", r.selected, r.stopped_because)
    })?;
    let oracle = analysis(100.0, ExplorationMode::ExhaustiveOrderings)?;
    let best = oracle
        .attempts
        .iter()
        .filter_map(|a| a.delivery_time)
        .fold(f64::INFINITY, f64::min);
    ensure(oracle.selected.is_none(), || "exhaustive mode met deadline 100".into())?;
    ensure((best - 2000.0 / 7.0).abs() < 1e-9, || format!("exhaustive minimum {best}"))?;
    Ok(format!(
        "500 -> Case B, 300 -> Case C, 100 -> none ({} exhaustive attempts, best {best:.2})",
        oracle.attempts.len()
    ))
}

fn demotion_walk() -> Check {
    let net = case_study_net();
    let s = case_a_scenario();
    let a = initial_configuration(&net, &s);
    ensure(same_ordering(&a, &case_a_scenario()), || "initial is not Case A".into())?;
    let run = |c: &Configuration| simulate::<f64>(&net, &c.apply(&s)).map_err(|e| e.to_string());
    let next = next_configurations(&net, &s, std::slice::from_ref(&a), &a, &run(&a)?);
    ensure(next.len() == 1 && same_ordering(&next[0], &case_b_scenario()), || {
        format!("from A: {:?}", next.iter().map(Configuration::summary).collect::<Vec<_>>())
    })?;
    let b = next[0].clone();
    let next = next_configurations(&net, &s, &[a, b.clone()], &b, &run(&b)?);
    ensure(next.len() == 1 && same_ordering(&next[0], &case_c_scenario()), || {
        format!("from B: {:?}", next.iter().map(Configuration::summary).collect::<Vec<_>>())
    })?;
    Ok("A -> B -> C".into())
}

fn property_suites() -> Check {
    use common::*;
    // speed_bounds also covers outflow of empty places.
    let checks: [(&str, fn(&RandomNet) -> Verdict); 5] = [
        ("bounds", speed_bounds),
        ("conservation", conservation),
        ("integrality", integrality),
        ("oracle", oracle_agreement),
        ("reruns", reproducible),
    ];
    let mut ran = [0usize; 5];
    let mut failures = Vec::new();
    for seed in 0..500u64 {
        let rn = build(seed, seed % 3 == 0);
        for (i, (_, check)) in checks.iter().enumerate() {
            match check(&rn) {
                Ok(true) => ran[i] += 1,
                Ok(false) => {}
                Err(e) => failures.push(e),
            }
        }
    }
    let summary = checks
        .iter()
        .zip(ran)
        .map(|((name, _), n)| format!("{name} {n}"))
        .collect::<Vec<_>>()
        .join(", ");
    if failures.is_empty() {
        Ok(format!("500 nets; checked: {summary}"))
    } else {
        Err(format!("{} failures, first: {}", failures.len(), failures[0]))
    }
}

fn full_vector() -> Check {
    let v = example_speeds(&case_study_net())?;
    let wrong: Vec<String> = (1..=19)
        .filter(|i| v.get(&format!("T{i}")) != Some(&q(EXAMPLE_VECTOR[i - 1])))
        .map(|i| format!("T{i}"))
        .collect();
    ensure(wrong.is_empty(), || format!("differs at {}", wrong.join(", ")))?;
    Ok("all 19 entries exact".into())
}

fn main() {
    let criteria = [
        Criterion { name: "example scenario", blocking: true, budget: Duration::from_secs(1), run: example_reproduction },
        Criterion { name: "case A", blocking: true, budget: Duration::from_secs(1), run: case_a },
        Criterion { name: "case B", blocking: true, budget: Duration::from_secs(1), run: case_b },
        Criterion { name: "case C", blocking: true, budget: Duration::from_secs(1), run: case_c },
        Criterion { name: "dss selection", blocking: true, budget: Duration::from_secs(10), run: dss_selection },
        Criterion { name: "demotion heuristic", blocking: true, budget: Duration::from_secs(10), run: demotion_walk },
        Criterion { name: "property suites", blocking: true, budget: Duration::from_secs(120), run: property_suites },
        Criterion { name: "full speed vector", blocking: false, budget: Duration::from_secs(1), run: full_vector },
    ];
    let mut blocking_failures = 0;
    for c in criteria {
        let start = Instant::now();
        let result = (c.run)();
        let elapsed = start.elapsed();
        let result = result.and_then(|detail| {
            if elapsed <= c.budget {
                Ok(detail)
            } else {
                Err(format!("{detail}; took {elapsed:?}, budget {:?}", c.budget))
            }
        });
        let (tag, detail) = match &result {
            Ok(d) => ("PASS", d.as_str()),
            Err(d) => ("FAIL", d.as_str()),
        };
        println!("{tag} {:<20} {:>9.3}s  {detail}", c.name, elapsed.as_secs_f64());
        if result.is_err() && c.blocking {
            blocking_failures += 1;
        }
    }
    if blocking_failures > 0 {
        std::process::exit(1);
    }
}
