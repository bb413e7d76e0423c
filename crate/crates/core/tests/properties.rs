use proptest::prelude::*;

use bamsdn::scenario::{self, RunOptions};

/// Two sources sharing a two-switch core, with three classes.
fn scenario_text(
    model: &str,
    bc: [u64; 3],
    counts: [u64; 4],
    reconfig: Option<(u64, &str, [u64; 3])>,
    cycle: u64,
    life: u64,
) -> String {
    let bc_line = |v: [u64; 3]| format!("{} {} {}", v[0], v[1], v[2]);
    let reconfig = reconfig
        .map(|(n, mode, v)| format!("[reconfig]\nafter_request {n} {mode} {}\n", bc_line(v)))
        .unwrap_or_default();
    format!(
        "[topology]
host A 10.0.0.1
host B 10.0.0.2
host D 10.0.0.3
switch S1
switch S2
link A-S1 A S1 60
link B-S2 B S2 60
link S1-S2 S1 S2 60
link S2-D S2 D 40
bottleneck S2-D
[classes]
class 0 2 5000-5999
class 1 5 6000-6999
class 2 8 7000-7999
[bc]
model {model}
bc {}
{reconfig}[demand]
demand A 0 {} 0
demand A 1 {} 1
demand B 0 {} 0
demand B 2 {} 2
[run]
destination D
cycles 4
cycle_length {cycle}
lsp_lifetime {life}
stop {}
window 10
",
        bc_line(bc),
        counts[0],
        counts[1],
        counts[2],
        counts[3],
        counts.iter().sum::<u64>()
    )
}

fn bcs(model: &'static str) -> impl Strategy<Value = [u64; 3]> {
    prop::array::uniform3(0u64..=40).prop_map(move |mut v| {
        if model == "rdm" {
            v.sort_unstable_by(|a, b| b.cmp(a));
        }
        v
    })
}

fn case() -> impl Strategy<Value = String> {
    (
        prop_oneof![Just("mam"), Just("rdm")],
        prop::array::uniform4(0u64..40),
        1u64..60,
        1u64..90,
        any::<bool>(),
        any::<bool>(),
    )
        .prop_flat_map(|(model, counts, cycle, life, with_reconfig, hard)| {
            (bcs(model), bcs(model), 1u64..200).prop_map(move |(bc, next, n)| {
                let total: u64 = counts.iter().sum();
                let reconfig = (with_reconfig && total > 1).then(|| {
                    (
                        1 + n % (total - 1),
                        if hard { "hard" } else { "soft" },
                        next,
                    )
                });
                scenario_text(model, bc, counts, reconfig, cycle, life)
            })
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn verified_runs_hold_every_invariant(text in case(), seed in 0u64..1000) {
        let spec = scenario::parse(&text).unwrap();
        let out = scenario::run(&spec, RunOptions { seed: Some(seed), verify: true });
        prop_assert!(out.is_ok(), "{}", out.err().unwrap());
        let out = out.unwrap();
        prop_assert_eq!(out.journal.len() as u64, spec.stop);
        let soft = spec.reconfigs.iter().all(|r| r.mode == bamsdn::bam::ReconfigMode::Soft);
        if spec.initial_bc.model == bamsdn::network::BamModel::Mam && soft {
            prop_assert!(out.preemptions.is_empty());
        }
        let state = out.controller.state();
        prop_assert!(state.active_ids().is_empty());
        prop_assert_eq!(out.controller.fabric().rule_count(), 0);
    }

    #[test]
    fn runs_are_reproducible(text in case(), seed in 0u64..1000) {
        let spec = scenario::parse(&text).unwrap();
        let a = scenario::run(&spec, RunOptions { seed: Some(seed), verify: false }).unwrap();
        let b = scenario::run(&spec, RunOptions { seed: Some(seed), verify: false }).unwrap();
        prop_assert_eq!(a.journal, b.journal);
        prop_assert_eq!(a.summary.render(), b.summary.render());
    }
}
