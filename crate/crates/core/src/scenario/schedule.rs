//! Turns demand entries into a time-ordered request list.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bam::ReconfigEvent;
use crate::controller::LspRequest;
use crate::network::NodeId;
use crate::units::SimTime;

use super::{ScenarioSpec, Trigger};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScheduledRequest {
    /// Position in arrival order.
    pub index: u64,
    pub host: NodeId,
    pub class: usize,
    pub cycle: u32,
    pub request: LspRequest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReconfigAt {
    /// Immediately before the request with this index is handled.
    BeforeRequest(u64),
    Time(SimTime),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScheduledReconfig {
    pub at: ReconfigAt,
    pub event: ReconfigEvent,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schedule {
    pub requests: Vec<ScheduledRequest>,
    pub reconfigs: Vec<ScheduledReconfig>,
}

/// Splits `count` requests over cycles `start..cycles`, the remainder going to
/// the earliest cycles.
fn per_cycle(count: u64, start: u32, cycles: u32) -> impl Iterator<Item = (u32, u64)> {
    let span = u64::from(cycles - start);
    let (base, extra) = (count / span, count % span);
    (start..cycles).map(move |c| {
        let k = u64::from(c - start);
        (c, base + u64::from(k < extra))
    })
}

/// Builds the request schedule for `seed`.
///
/// Each request gets a uniformly drawn offset inside its cycle. Ties in arrival
/// time keep demand-entry order.
pub fn schedule(spec: &ScenarioSpec, seed: u64) -> Schedule {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cycle_us = spec.cycle_length.micros();
    let mut draft = Vec::new();
    for d in &spec.demand {
        for (cycle, n) in per_cycle(d.count, d.start_cycle, spec.cycles) {
            for _ in 0..n {
                let offset = rng.gen_range(0..cycle_us);
                let time = spec.cycle_length * u64::from(cycle) + SimTime::from_micros(offset);
                draft.push((time, draft.len(), d.host, d.class, cycle));
            }
        }
    }
    draft.sort();

    let requests: Vec<ScheduledRequest> = draft
        .into_iter()
        .enumerate()
        .map(|(i, (time, _, host, class, cycle))| {
            let index = i as u64;
            let match_tuple = spec
                .match_tuple(host, class, index)
                .expect("validated scenarios classify every demand entry");
            ScheduledRequest {
                index,
                host,
                class,
                cycle,
                request: LspRequest {
                    match_tuple,
                    arrival_time: time,
                    lifetime: spec.lsp_lifetime,
                },
            }
        })
        .collect();

    let reconfigs = spec
        .reconfigs
        .iter()
        .map(|r| {
            let (at, trigger_time) = match r.trigger {
                Trigger::AfterRequest(n) => {
                    let time = requests
                        .get(n as usize)
                        .map(|q| q.request.arrival_time)
                        .unwrap_or(SimTime::ZERO);
                    (ReconfigAt::BeforeRequest(n), time)
                }
                Trigger::AtTime(t) => (ReconfigAt::Time(t), t),
            };
            ScheduledReconfig {
                at,
                event: ReconfigEvent {
                    new_bc: r.bc.clone(),
                    mode: r.mode,
                    trigger_time,
                },
            }
        })
        .collect();

    Schedule {
        requests,
        reconfigs,
    }
}

impl Schedule {
    /// One line per request: index, arrival time, host index, class, cycle.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for r in &self.requests {
            let _ = writeln!(
                out,
                "{} {} {} {} {}",
                r.index,
                r.request.arrival_time,
                r.host.index(),
                r.class,
                r.cycle
            );
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn even_split_with_remainder_first() {
        let split: Vec<_> = per_cycle(400, 0, 10).collect();
        assert!(split.iter().all(|&(_, n)| n == 40));
        let split: Vec<_> = per_cycle(45, 1, 10).collect();
        assert_eq!(split.len(), 9);
        assert!(split.iter().all(|&(_, n)| n == 5));
        let split: Vec<u64> = per_cycle(7, 2, 5).map(|(_, n)| n).collect();
        assert_eq!(split, vec![3, 2, 2]);
    }
}
