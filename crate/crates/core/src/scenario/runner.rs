//! Discrete-event execution of a scenario.
//!
//! At equal timestamps expiries fire first (by LSP id), then reconfigurations,
//! then requests in arrival order.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use crate::bam::{ReconfigEvent, ReconfigMode};
use crate::controller::{ClassifierTable, Controller, ControllerError, Outcome, Route};
use crate::fabric::Fabric;
use crate::invariants;
use crate::metrics::{ClassSummary, Journal, MetricsRecord, MetricsSink, Span};
use crate::network::{BamModel, LspId, NetworkState};
use crate::units::{Bandwidth, SimTime};

use super::schedule::{schedule, ReconfigAt, Schedule};
use super::ScenarioSpec;
use crate::metrics::RunSummary;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Overrides the scenario seed.
    pub seed: Option<u64>,
    /// Rescan every invariant after each event.
    pub verify: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PreemptionCause {
    Request { class: usize, lsp: LspId },
    Reconfig(ReconfigMode),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PreemptionEvent {
    pub time: SimTime,
    /// Number of requests handled before this event.
    pub requests_before: u64,
    pub cause: PreemptionCause,
    /// Victims with their classes.
    pub victims: Vec<(LspId, usize)>,
}

#[derive(Debug)]
pub struct RunOutput {
    pub journal: Journal,
    pub summary: RunSummary,
    pub preemptions: Vec<PreemptionEvent>,
    pub schedule: Schedule,
    pub controller: Controller,
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("{error} at {time}\n{snapshot}")]
    Controller {
        error: ControllerError,
        time: SimTime,
        snapshot: String,
    },
    #[error("invariant violated at {time}: {message}\n{snapshot}")]
    Invariant {
        message: String,
        time: SimTime,
        snapshot: String,
    },
}

impl RunError {
    /// Process exit status for the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Controller { .. } => 3,
            RunError::Invariant { .. } => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Event {
    Expiry(LspId),
    Reconfig(usize),
    Request(usize),
}

/// Network state, fabric and classifier for the scenario's initial
/// configuration, with routes from every demand source to the destination.
pub fn build_controller(spec: &ScenarioSpec) -> Result<Controller, ControllerError> {
    let state = NetworkState::new(
        spec.topology.clone(),
        spec.classes.clone(),
        spec.initial_bc.clone(),
    );
    let fabric = Fabric::new(&spec.topology);
    let mut classifier = ClassifierTable::new(spec.classifier.clone());
    let dst_ip = spec
        .topology
        .node(spec.destination)
        .ip()
        .ok_or_else(|| ControllerError::Invariant("destination is not a host".into()))?;
    for d in &spec.demand {
        let src_ip = match spec.topology.node(d.host).ip() {
            Some(ip) => ip,
            None => continue,
        };
        if classifier.route(src_ip, dst_ip).is_none() {
            let route = Route::compute(&state, &fabric, d.host, spec.destination)?;
            classifier.add_route(src_ip, dst_ip, route);
        }
    }
    Ok(Controller::new(state, fabric, classifier))
}

fn snapshot(controller: &Controller, spec: &ScenarioSpec) -> String {
    let state = controller.state();
    let mut out = format!("bc={:?}\n", state.bc_config().bc);
    for link in state.topology().links() {
        out.push_str(&format!(
            "{} alloc={:?}\n",
            link.name,
            state
                .alloc(link.id)
                .iter()
                .map(|b| b.to_string())
                .collect::<Vec<_>>()
        ));
    }
    out.push_str(&format!(
        "active={} reference={}\n",
        state.active_ids().len(),
        spec.topology.link(spec.bottleneck).name
    ));
    out
}

fn record(
    controller: &Controller,
    spec: &ScenarioSpec,
    index: u64,
    time: SimTime,
) -> MetricsRecord {
    let state = controller.state();
    let counters = state.counters();
    MetricsRecord {
        request_index: index,
        sim_time: time,
        util: state.alloc(spec.bottleneck).to_vec(),
        blocked: counters.iter().map(|c| c.blocked).collect(),
        admitted: counters.iter().map(|c| c.admitted).collect(),
        preempted: counters.iter().map(|c| c.preempted).collect(),
    }
}

pub fn run(spec: &ScenarioSpec, options: RunOptions) -> Result<RunOutput, RunError> {
    let mut sink: Vec<MetricsRecord> = Vec::new();
    run_with_sink(spec, options, &mut sink)
}

/// Runs the scenario, passing each per-request record to `sink` as it is
/// produced.
pub fn run_with_sink(
    spec: &ScenarioSpec,
    options: RunOptions,
    sink: &mut dyn MetricsSink,
) -> Result<RunOutput, RunError> {
    let seed = options.seed.unwrap_or(spec.seed);
    let plan = schedule(spec, seed);
    let mut controller = build_controller(spec)
        .map_err(|error| RunError::Controller {
            error,
            time: SimTime::ZERO,
            snapshot: String::new(),
        })?
        .with_verification(options.verify);

    let mut queue: BinaryHeap<Reverse<(SimTime, Event)>> = BinaryHeap::new();
    for (i, r) in plan.requests.iter().enumerate() {
        queue.push(Reverse((r.request.arrival_time, Event::Request(i))));
    }
    let mut before_request: Vec<Vec<usize>> = vec![Vec::new(); plan.requests.len()];
    for (i, r) in plan.reconfigs.iter().enumerate() {
        match r.at {
            ReconfigAt::BeforeRequest(n) => before_request[n as usize].push(i),
            ReconfigAt::Time(t) => queue.push(Reverse((t, Event::Reconfig(i)))),
        }
    }

    let mut journal = Journal::new(spec.classes.len());
    let mut preemptions = Vec::new();
    let mut handled = 0u64;
    let mut peak = Bandwidth::ZERO;

    let fail =
        |controller: &Controller, error: ControllerError, time: SimTime| RunError::Controller {
            snapshot: snapshot(controller, spec),
            error,
            time,
        };

    while let Some(Reverse((now, event))) = queue.pop() {
        let mut reconfigs: Vec<usize> = Vec::new();
        match event {
            Event::Expiry(lsp) => {
                // Preempted LSPs leave stale expiries behind.
                if controller.state().active_ids().contains(&lsp) {
                    controller
                        .handle_expiry(lsp, now)
                        .map_err(|e| fail(&controller, e, now))?;
                }
            }
            Event::Reconfig(i) => reconfigs.push(i),
            Event::Request(i) => reconfigs.extend(before_request[i].iter().copied()),
        }
        for i in reconfigs {
            let event: &ReconfigEvent = &plan.reconfigs[i].event;
            let victims = controller
                .apply_reconfig(event)
                .map_err(|e| fail(&controller, e, now))?;
            if !victims.is_empty() {
                preemptions.push(PreemptionEvent {
                    time: now,
                    requests_before: handled,
                    cause: PreemptionCause::Reconfig(event.mode),
                    victims: victims
                        .iter()
                        .map(|v| (*v, controller.state().lsp(*v).map_or(0, |l| l.class_index)))
                        .collect(),
                });
            }
            if options.verify && event.mode == ReconfigMode::Soft && !victims.is_empty() {
                return Err(RunError::Invariant {
                    message: "soft reconfiguration preempted".into(),
                    time: now,
                    snapshot: snapshot(&controller, spec),
                });
            }
        }
        if let Event::Request(i) = event {
            let req = &plan.requests[i];
            let report = controller
                .handle_request(&req.request)
                .map_err(|e| fail(&controller, e, now))?;
            if let Outcome::Established(id) = report.outcome {
                queue.push(Reverse((now + req.request.lifetime, Event::Expiry(id))));
            }
            if !report.preempted.is_empty() {
                let victims: Vec<(LspId, usize)> = report
                    .preempted
                    .iter()
                    .map(|v| (*v, controller.state().lsp(*v).map_or(0, |l| l.class_index)))
                    .collect();
                if options.verify {
                    let rdm = controller.state().bc_config().model == BamModel::Rdm;
                    if !rdm || victims.iter().any(|&(_, c)| c >= report.class) {
                        return Err(RunError::Invariant {
                            message: format!("{} preempted a class it may not", report.lsp),
                            time: now,
                            snapshot: snapshot(&controller, spec),
                        });
                    }
                }
                preemptions.push(PreemptionEvent {
                    time: now,
                    requests_before: handled,
                    cause: PreemptionCause::Request {
                        class: report.class,
                        lsp: report.lsp,
                    },
                    victims,
                });
            }
            let rec = record(&controller, spec, handled, now);
            peak = peak.max(rec.total_util());
            if let Some(prev) = journal.records().last() {
                let shrunk = (0..spec.classes.len()).any(|c| {
                    rec.blocked[c] < prev.blocked[c]
                        || rec.admitted[c] < prev.admitted[c]
                        || rec.preempted[c] < prev.preempted[c]
                });
                if shrunk {
                    return Err(RunError::Invariant {
                        message: "a cumulative counter decreased".into(),
                        time: now,
                        snapshot: snapshot(&controller, spec),
                    });
                }
            }
            sink.record(&rec);
            journal.push(rec);
            handled += 1;
        }
        if options.verify {
            invariants::check(&controller).map_err(|message| RunError::Invariant {
                message,
                time: now,
                snapshot: snapshot(&controller, spec),
            })?;
        }
    }

    let summary = summarize(spec, seed, &journal, &controller, peak);
    Ok(RunOutput {
        journal,
        summary,
        preemptions,
        schedule: plan,
        controller,
    })
}

fn summarize(
    spec: &ScenarioSpec,
    seed: u64,
    journal: &Journal,
    controller: &Controller,
    peak: Bandwidth,
) -> RunSummary {
    let state = controller.state();
    let last = journal.len().checked_sub(1);
    let classes = state
        .counters()
        .iter()
        .enumerate()
        .map(|(c, k)| ClassSummary {
            requested: k.requested(),
            admitted: k.admitted,
            blocked: k.blocked,
            preempted: k.preempted,
            completed: k.completed,
            blocking_rate: last.and_then(|at| journal.blocking_rate(c, Span::Cumulative, at).ok()),
            windowed_blocking_rate: last.and_then(|at| {
                journal
                    .blocking_rate(c, Span::Trailing(spec.window), at)
                    .ok()
            }),
            preemption_rate: last.and_then(|at| journal.preemption_rate(c, at).ok()),
        })
        .collect();
    RunSummary {
        scenario: spec.name.clone(),
        seed,
        requests: journal.len() as u64,
        reference_link: spec.topology.link(spec.bottleneck).name.clone(),
        peak_util_total: peak,
        final_util: journal
            .records()
            .last()
            .map(|r| r.util.clone())
            .unwrap_or_else(|| vec![Bandwidth::ZERO; spec.classes.len()]),
        classes,
    }
}
