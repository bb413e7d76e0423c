//! Declarative experiment descriptions, their request schedule and the
//! event-driven runner.
//!
//! The scenario file grammar is documented in `format.rs` and in the README.

mod format;
mod runner;
mod schedule;

use std::collections::BTreeSet;
use std::io;
use std::path::Path;

pub use format::parse;
pub use runner::{
    build_controller, run, run_with_sink, PreemptionCause, PreemptionEvent, RunError, RunOptions,
    RunOutput,
};
pub use schedule::{schedule, ReconfigAt, Schedule, ScheduledReconfig, ScheduledRequest};

use crate::bam::ReconfigMode;
use crate::controller::ClassifierRule;
use crate::fabric::MatchTuple;
use crate::network::{BcConfig, LinkId, NodeId, Topology, TrafficClass};
use crate::units::SimTime;

/// LSP requests issued by one host for one class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DemandEntry {
    pub host: NodeId,
    pub class: usize,
    pub count: u64,
    pub start_cycle: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Trigger {
    /// Fires once this many requests have been handled.
    AfterRequest(u64),
    AtTime(SimTime),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReconfigSpec {
    pub trigger: Trigger,
    pub mode: ReconfigMode,
    pub bc: BcConfig,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScenarioSpec {
    pub name: String,
    pub topology: Topology,
    /// Reference link for utilisation series.
    pub bottleneck: LinkId,
    pub destination: NodeId,
    pub classes: Vec<TrafficClass>,
    pub classifier: Vec<ClassifierRule>,
    pub initial_bc: BcConfig,
    pub reconfigs: Vec<ReconfigSpec>,
    pub demand: Vec<DemandEntry>,
    pub cycles: u32,
    pub cycle_length: SimTime,
    pub lsp_lifetime: SimTime,
    pub seed: u64,
    pub stop: u64,
    /// Trailing window (requests per class) for windowed blocking rates.
    pub window: u64,
    pub protocol: u8,
}

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("line {line}: {field}: {message}")]
    Parse {
        line: usize,
        field: String,
        message: String,
    },
    #[error("invalid scenario: {0}")]
    Validation(String),
    #[error("cannot read scenario: {0}")]
    Io(#[from] io::Error),
}

/// Scenarios shipped with the crate.
pub const BUNDLED: &[(&str, &str)] = &[
    ("exp1_mam", include_str!("../../scenarios/exp1_mam.scn")),
    ("exp1_rdm", include_str!("../../scenarios/exp1_rdm.scn")),
    ("exp2_hard", include_str!("../../scenarios/exp2_hard.scn")),
    ("exp2_soft", include_str!("../../scenarios/exp2_soft.scn")),
];

/// Reads and validates a scenario file.
pub fn load(path: &Path) -> Result<ScenarioSpec, ScenarioError> {
    let text = std::fs::read_to_string(path)?;
    parse(&text)
}

/// Parses one of the bundled scenarios by name.
pub fn bundled(name: &str) -> Option<ScenarioSpec> {
    BUNDLED
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| parse(text).expect("bundled scenarios are valid"))
}

impl ScenarioSpec {
    pub fn total_requests(&self) -> u64 {
        self.demand.iter().map(|d| d.count).sum()
    }

    /// Match tuple a host uses for its `seq`-th request of `class`.
    pub fn match_tuple(&self, host: NodeId, class: usize, seq: u64) -> Option<MatchTuple> {
        let src_ip = self.topology.node(host).ip()?;
        let dst_ip = self.topology.node(self.destination).ip()?;
        let rule = self.classifier.iter().find(|r| r.class == class)?;
        Some(MatchTuple {
            src_ip,
            dst_ip,
            src_port: 1024 + (seq % 64_000) as u16,
            dst_port: *rule.dst_ports.start(),
            protocol: self.protocol,
        })
    }

    /// Checks every invariant a scenario must satisfy before it can run.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let fail = |msg: String| Err(ScenarioError::Validation(msg));
        if self.classes.is_empty() {
            return fail("at least one traffic class is required".into());
        }
        for (i, class) in self.classes.iter().enumerate() {
            if class.index != i {
                return fail(format!(
                    "class indices must be 0..{} without gaps",
                    self.classes.len()
                ));
            }
            if class.max_lsp_bandwidth.is_zero() {
                return fail(format!("class {i} has zero max LSP bandwidth"));
            }
        }
        for rule in &self.classifier {
            if rule.dst_ports.is_empty() {
                return fail(format!("class {} has an empty port range", rule.class));
            }
        }
        if self.bottleneck.index() >= self.topology.links().len() {
            return fail("bottleneck link does not exist".into());
        }
        let dest = self.topology.node(self.destination);
        if dest.ip().is_none() {
            return fail(format!("destination `{}` is not a host", dest.name));
        }
        if self.cycles == 0 {
            return fail("cycles must be at least 1".into());
        }
        if self.cycle_length == SimTime::ZERO {
            return fail("cycle_length must be positive".into());
        }
        if self.lsp_lifetime == SimTime::ZERO {
            return fail("lsp_lifetime must be positive".into());
        }
        if self.window == 0 {
            return fail("window must be at least 1".into());
        }
        self.initial_bc
            .validate(&self.topology, self.classes.len())
            .map_err(|e| ScenarioError::Validation(format!("[bc]: {e}")))?;
        for (i, r) in self.reconfigs.iter().enumerate() {
            r.bc.validate(&self.topology, self.classes.len())
                .map_err(|e| ScenarioError::Validation(format!("reconfig #{i}: {e}")))?;
            if let Trigger::AfterRequest(n) = r.trigger {
                if n == 0 || n >= self.stop {
                    return fail(format!(
                        "reconfig #{i}: after_request {n} must lie strictly between 0 and stop ({})",
                        self.stop
                    ));
                }
            }
        }
        let mut seen = BTreeSet::new();
        for d in &self.demand {
            let host = self.topology.node(d.host);
            if host.ip().is_none() {
                return fail(format!("demand source `{}` is not a host", host.name));
            }
            if d.class >= self.classes.len() {
                return fail(format!("demand for unknown class {}", d.class));
            }
            if d.start_cycle >= self.cycles {
                return fail(format!(
                    "demand {} class {}: start_cycle {} must be below cycles ({})",
                    host.name, d.class, d.start_cycle, self.cycles
                ));
            }
            if !seen.insert((d.host, d.class)) {
                return fail(format!(
                    "duplicate demand for {} class {}",
                    host.name, d.class
                ));
            }
            if let Err(e) = self.topology.path_for(d.host, self.destination) {
                return fail(format!("demand source `{}`: {e}", host.name));
            }
        }
        let total = self.total_requests();
        if total != self.stop {
            return fail(format!(
                "demand counts sum to {total} but stop is {}",
                self.stop
            ));
        }
        for class in 0..self.classes.len() {
            let Some(tuple) = self
                .demand
                .first()
                .and_then(|d| self.match_tuple(d.host, class, 0))
            else {
                if self.demand.is_empty() {
                    break;
                }
                return fail(format!("class {class} has no classifier rule"));
            };
            let hit = self
                .classifier
                .iter()
                .find(|r| r.matches(&tuple))
                .map(|r| r.class);
            if hit != Some(class) {
                return fail(format!("class {class} requests are classified as {hit:?}"));
            }
        }
        Ok(())
    }
}
