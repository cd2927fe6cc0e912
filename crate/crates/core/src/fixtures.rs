//! The bundled four-node transfer network and its scenarios.
//!
//! Node 1 holds the message (P5) and forwards it to node 2 (T4), straight to
//! node 4 (T5) or to node 3 (T6). Nodes 2 and 3 relay to node 4 or to each
//! other. Each node has a processing capacity fed by a source transition
//! (T1..T3) and drained by local jobs and an unbounded absorber, so that the
//! capacity places never accumulate. A transfer consumes one unit of the
//! sending node's capacity per packet.
//!
//! Calibrated elements: the arc T19 -> P10 and the place P10 itself. Their
//! placement is not fixed by the published description of the network; they
//! are chosen so that the published speed vectors and delivery times of the
//! example and of the three cases reproduce.

use crate::net::{ArcDef, ConflictPolicy, HybridNet, MaxSpeed, PlaceDef, TransitionDef};
use crate::scenario::ScenarioConfig;

pub const CASE_STUDY: &str = "hpn-case-study";

/// Maximal speeds of T1..T19 in the example configuration.
pub const EXAMPLE_MAX_SPEEDS: [Option<f64>; 19] = [
    Some(4.0),
    Some(3.0),
    Some(5.0),
    Some(1.0),
    Some(1.5),
    Some(2.0),
    Some(1.0),
    Some(0.5),
    Some(1.0),
    Some(1.0),
    Some(1.0),
    Some(2.0),
    None,
    Some(0.5),
    Some(0.5),
    None,
    Some(1.0),
    None,
    Some(1.0),
];

/// Elements whose placement was calibrated rather than read off the network description.
pub const CALIBRATED: [&str; 2] = ["P10", "T19->P10"];

pub fn case_study_net() -> HybridNet {
    let mut net = HybridNet::new(CASE_STUDY);
    let places = [
        ("P1", 0.0, "processing capacity of node 1"),
        ("P2", 0.0, "processing capacity of node 2"),
        ("P3", 0.0, "processing capacity of node 3"),
        ("P4", 0.0, "packets received by node 4"),
        ("P5", 1000.0, "packets to be transmitted by node 1"),
        ("P6", 0.0, "packets in transit 1 -> 2"),
        ("P7", 0.0, "packets in transit 1 -> 3"),
        ("P8", 0.0, "packets in transit 3 -> 2"),
        ("P9", 0.0, "packets in transit 2 -> 3"),
        // Calibrated: node 2 staging buffer for the 2 -> 3 relay.
        ("P10", 0.0, "packets staged at node 2 for node 3"),
    ];
    for (id, initial, label) in places {
        net.places.push(PlaceDef::continuous(id, initial).with_label(label));
    }
    for k in 4..=11 {
        net.places.push(
            PlaceDef::discrete(&format!("D{k}"), 1)
                .with_label(&format!("availability of the connection fired by T{k}")),
        );
    }

    let labels = [
        "capacity source of node 1",
        "capacity source of node 2",
        "capacity source of node 3",
        "transfer 1 -> 2",
        "transfer 1 -> 4",
        "transfer 1 -> 3",
        "transfer 2 -> 3",
        "transfer 2 -> 4",
        "relay 3 -> 2 -> 4",
        "transfer 3 -> 4",
        "relay 2 -> 3 -> 4",
        "transfer 3 -> 2",
        "capacity absorber of node 2",
        "local job of node 2",
        "local job of node 1",
        "capacity absorber of node 1",
        "local job of node 3",
        "capacity absorber of node 3",
        "staging at node 2 for node 3",
    ];
    for (i, (speed, label)) in EXAMPLE_MAX_SPEEDS.iter().zip(labels).enumerate() {
        let max_speed = speed.map_or(MaxSpeed::Unbounded, MaxSpeed::Finite);
        net.transitions
            .push(TransitionDef::continuous(&format!("T{}", i + 1), max_speed).with_label(label));
    }

    let arcs: &[(&str, &str)] = &[
        ("T1", "P1"),
        ("T2", "P2"),
        ("T3", "P3"),
        // node 1 sends: capacity plus one packet
        ("P1", "T4"),
        ("P5", "T4"),
        ("T4", "P6"),
        ("P1", "T5"),
        ("P5", "T5"),
        ("T5", "P4"),
        ("P1", "T6"),
        ("P5", "T6"),
        ("T6", "P7"),
        // node 2
        ("P6", "T19"),
        // Calibrated arc.
        ("T19", "P10"),
        ("P10", "T7"),
        ("P2", "T7"),
        ("T7", "P9"),
        ("P6", "T8"),
        ("P2", "T8"),
        ("T8", "P4"),
        ("P8", "T9"),
        ("P2", "T9"),
        ("T9", "P4"),
        // node 3
        ("P7", "T10"),
        ("P3", "T10"),
        ("T10", "P4"),
        ("P9", "T11"),
        ("P3", "T11"),
        ("T11", "P4"),
        ("P7", "T12"),
        ("P3", "T12"),
        ("T12", "P8"),
        // local jobs and absorbers
        ("P2", "T13"),
        ("P2", "T14"),
        ("P1", "T15"),
        ("P1", "T16"),
        ("P3", "T17"),
        ("P3", "T18"),
    ];
    for (from, to) in arcs {
        net.arcs.push(ArcDef::new(from, to, 1.0));
    }
    for k in 4..=11 {
        let (d, t) = (format!("D{k}"), format!("T{k}"));
        net.arcs.push(ArcDef::new(&d, &t, 1.0));
        net.arcs.push(ArcDef::new(&t, &d, 1.0));
    }

    net.policies = vec![
        ConflictPolicy::priority("P1", &["T15", "T4", "T5", "T6", "T16"]),
        ConflictPolicy::priority("P2", &["T14", "T7", "T8", "T9", "T13"]),
        ConflictPolicy::priority("P3", &["T17", "T10", "T11", "T12", "T18"]),
        ConflictPolicy::priority("P5", &["T4", "T5", "T6"]),
        ConflictPolicy::priority("P6", &["T8", "T19"]),
        ConflictPolicy::priority("P7", &["T12", "T10"]),
    ];
    net
}

fn base_scenario(id: &str) -> ScenarioConfig {
    let mut s = ScenarioConfig::new(id, CASE_STUDY, "P4", 1000.0, 2000.0);
    s.transfer = vec!["T4".into(), "T5".into(), "T6".into()];
    s
}

/// The example run with the declared maximal speeds and priorities.
pub fn example_scenario() -> ScenarioConfig {
    base_scenario("example")
}

/// Case A: node 1 gets faster links, T4 first at node 1.
pub fn case_a_scenario() -> ScenarioConfig {
    let mut s = base_scenario("case-a");
    for (t, v) in [("T4", 3.0), ("T5", 2.0), ("T12", 1.0), ("T19", 0.5)] {
        s = s.with_constant_speed(t, MaxSpeed::Finite(v));
    }
    s
}

/// Case B: T4 demoted below T5.
pub fn case_b_scenario() -> ScenarioConfig {
    let mut s = case_a_scenario()
        .with_policy(ConflictPolicy::priority("P1", &["T15", "T5", "T4", "T6", "T16"]))
        .with_policy(ConflictPolicy::priority("P5", &["T5", "T4", "T6"]));
    s.id = "case-b".into();
    s
}

/// Case C: T4 last among the transfers.
pub fn case_c_scenario() -> ScenarioConfig {
    let mut s = case_a_scenario()
        .with_policy(ConflictPolicy::priority("P1", &["T15", "T5", "T6", "T4", "T16"]))
        .with_policy(ConflictPolicy::priority("P5", &["T5", "T6", "T4"]));
    s.id = "case-c".into();
    s
}
