//! LSP registry and per-link per-class allocation bookkeeping.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::units::{Bandwidth, SimTime};

use super::bc::{BcConfig, TrafficClass};
use super::topology::{LinkId, NodeId, Topology};
use super::NetError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LspId(pub u64);

impl fmt::Display for LspId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "lsp{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LspState {
    Requested,
    Active,
    Blocked,
    Preempted,
    Completed,
}

impl LspState {
    pub fn can_become(self, next: LspState) -> bool {
        use LspState::*;
        matches!(
            (self, next),
            (Requested, Active) | (Requested, Blocked) | (Active, Preempted) | (Active, Completed)
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ReleaseReason {
    Completed,
    Preempted,
}

impl From<ReleaseReason> for LspState {
    fn from(r: ReleaseReason) -> Self {
        match r {
            ReleaseReason::Completed => LspState::Completed,
            ReleaseReason::Preempted => LspState::Preempted,
        }
    }
}

/// One emulated label-switched path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lsp {
    pub id: LspId,
    pub class_index: usize,
    pub demand: Bandwidth,
    pub path: Vec<LinkId>,
    pub state: LspState,
    pub source_host: NodeId,
    pub dest_host: NodeId,
    pub request_time: SimTime,
    pub lifetime: SimTime,
    pub admit_time: Option<SimTime>,
    pub end_time: Option<SimTime>,
    /// Position in admission order; larger is newer.
    pub admit_seq: Option<u64>,
}

impl Lsp {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        id: LspId,
        class_index: usize,
        demand: Bandwidth,
        path: Vec<LinkId>,
        source_host: NodeId,
        dest_host: NodeId,
        request_time: SimTime,
        lifetime: SimTime,
    ) -> Self {
        Lsp {
            id,
            class_index,
            demand,
            path,
            state: LspState::Requested,
            source_host,
            dest_host,
            request_time,
            lifetime,
            admit_time: None,
            end_time: None,
            admit_seq: None,
        }
    }

    pub fn traverses(&self, link: LinkId) -> bool {
        self.path.contains(&link)
    }

    fn transition(&mut self, next: LspState) -> Result<(), NetError> {
        if !self.state.can_become(next) {
            return Err(NetError::InvalidTransition {
                lsp: self.id,
                from: self.state,
                to: next,
            });
        }
        self.state = next;
        Ok(())
    }
}

/// Allocated bandwidth per link and class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinkLoads {
    alloc: Vec<Vec<Bandwidth>>,
}

impl LinkLoads {
    pub fn new(links: usize, classes: usize) -> Self {
        LinkLoads {
            alloc: vec![vec![Bandwidth::ZERO; classes]; links],
        }
    }

    pub fn of(&self, link: LinkId) -> &[Bandwidth] {
        &self.alloc[link.index()]
    }

    pub fn total(&self, link: LinkId) -> Bandwidth {
        self.alloc[link.index()].iter().sum()
    }

    pub fn add(&mut self, path: &[LinkId], class: usize, demand: Bandwidth) {
        for &link in path {
            self.alloc[link.index()][class] += demand;
        }
    }

    /// Panics on underflow, which would mean the registry and loads diverged.
    pub fn remove(&mut self, path: &[LinkId], class: usize, demand: Bandwidth) {
        for &link in path {
            let slot = &mut self.alloc[link.index()][class];
            *slot = slot.checked_sub(demand).expect("allocation underflow");
        }
    }
}

/// Per-class event counters. All monotone.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ClassCounters {
    pub admitted: u64,
    pub blocked: u64,
    pub preempted: u64,
    pub completed: u64,
}

impl ClassCounters {
    pub fn requested(&self) -> u64 {
        self.admitted + self.blocked
    }
}

/// A soft reconfiguration that has not finished draining: for each
/// over-allocated (link, constraint) the highest load still tolerated.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SoftDrain {
    pub config: BcConfig,
    pub ceilings: BTreeMap<(LinkId, usize), Bandwidth>,
}

/// The controller's view of the network.
#[derive(Debug, Clone)]
pub struct NetworkState {
    topology: Topology,
    classes: Vec<TrafficClass>,
    loads: LinkLoads,
    lsps: BTreeMap<LspId, Lsp>,
    active: BTreeSet<LspId>,
    bc_config: BcConfig,
    pending_soft_bc: Option<SoftDrain>,
    counters: Vec<ClassCounters>,
    next_admit_seq: u64,
}

impl NetworkState {
    pub fn new(topology: Topology, classes: Vec<TrafficClass>, bc_config: BcConfig) -> Self {
        let loads = LinkLoads::new(topology.links().len(), classes.len());
        let counters = vec![ClassCounters::default(); classes.len()];
        NetworkState {
            topology,
            classes,
            loads,
            lsps: BTreeMap::new(),
            active: BTreeSet::new(),
            bc_config,
            pending_soft_bc: None,
            counters,
            next_admit_seq: 0,
        }
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn classes(&self) -> &[TrafficClass] {
        &self.classes
    }

    pub fn loads(&self) -> &LinkLoads {
        &self.loads
    }

    pub fn alloc(&self, link: LinkId) -> &[Bandwidth] {
        self.loads.of(link)
    }

    pub fn bc_config(&self) -> &BcConfig {
        &self.bc_config
    }

    pub fn pending_soft_bc(&self) -> Option<&SoftDrain> {
        self.pending_soft_bc.as_ref()
    }

    pub fn counters(&self) -> &[ClassCounters] {
        &self.counters
    }

    pub fn lsp(&self, id: LspId) -> Option<&Lsp> {
        self.lsps.get(&id)
    }

    pub fn lsps(&self) -> impl Iterator<Item = &Lsp> {
        self.lsps.values()
    }

    pub fn active_ids(&self) -> &BTreeSet<LspId> {
        &self.active
    }

    pub fn active_lsps(&self) -> impl Iterator<Item = &Lsp> {
        self.active.iter().map(|id| &self.lsps[id])
    }

    /// Marks `lsp` Active and charges its demand to every path link.
    pub fn commit(&mut self, mut lsp: Lsp, now: SimTime) -> Result<LspId, NetError> {
        if self.lsps.contains_key(&lsp.id) {
            return Err(NetError::DuplicateLsp(lsp.id));
        }
        if lsp.state != LspState::Requested {
            return Err(NetError::InvalidTransition {
                lsp: lsp.id,
                from: lsp.state,
                to: LspState::Active,
            });
        }
        self.check_lsp_shape(&lsp)?;
        for &link in &lsp.path {
            let capacity = self.topology.link(link).capacity;
            let total = self.loads.total(link) + lsp.demand;
            if total > capacity {
                return Err(NetError::CapacityViolation {
                    link,
                    total,
                    capacity,
                });
            }
        }
        lsp.transition(LspState::Active)?;
        lsp.admit_time = Some(now);
        lsp.admit_seq = Some(self.next_admit_seq);
        self.next_admit_seq += 1;
        self.loads.add(&lsp.path, lsp.class_index, lsp.demand);
        self.counters[lsp.class_index].admitted += 1;
        self.active.insert(lsp.id);
        let id = lsp.id;
        self.lsps.insert(id, lsp);
        Ok(id)
    }

    /// Records a denied request.
    pub fn record_blocked(&mut self, mut lsp: Lsp, now: SimTime) -> Result<LspId, NetError> {
        if self.lsps.contains_key(&lsp.id) {
            return Err(NetError::DuplicateLsp(lsp.id));
        }
        if lsp.class_index >= self.classes.len() {
            return Err(NetError::UnknownClass(lsp.class_index));
        }
        lsp.transition(LspState::Blocked)?;
        lsp.end_time = Some(now);
        self.counters[lsp.class_index].blocked += 1;
        let id = lsp.id;
        self.lsps.insert(id, lsp);
        Ok(id)
    }

    /// Tears down an Active LSP and returns its demand to every path link.
    pub fn release(
        &mut self,
        id: LspId,
        reason: ReleaseReason,
        now: SimTime,
    ) -> Result<&Lsp, NetError> {
        let lsp = self.lsps.get_mut(&id).ok_or(NetError::UnknownLsp(id))?;
        if lsp.state != LspState::Active {
            return Err(NetError::NotActive {
                lsp: id,
                state: lsp.state,
            });
        }
        lsp.transition(reason.into())?;
        lsp.end_time = Some(now);
        self.loads.remove(&lsp.path, lsp.class_index, lsp.demand);
        let counters = &mut self.counters[lsp.class_index];
        match reason {
            ReleaseReason::Completed => counters.completed += 1,
            ReleaseReason::Preempted => counters.preempted += 1,
        }
        self.active.remove(&id);
        Ok(&self.lsps[&id])
    }

    /// Replaces the admission constraints. Callers validate `config` first.
    pub(crate) fn set_bc_config(&mut self, config: BcConfig) {
        self.bc_config = config;
    }

    pub(crate) fn set_soft_drain(&mut self, drain: Option<SoftDrain>) {
        self.pending_soft_bc = drain;
    }

    /// Lowers the tolerated ceilings of a draining soft reconfiguration to
    /// the current loads and forgets the drain once every constraint holds.
    pub fn refresh_soft_drain(&mut self) {
        let Some(drain) = self.pending_soft_bc.as_mut() else {
            return;
        };
        let topology = &self.topology;
        let loads = &self.loads;
        drain.ceilings.retain(|&(link, idx), ceiling| {
            let constraint = &drain.config.constraints(topology.link(link))[idx];
            let load = constraint.load(loads.of(link));
            *ceiling = (*ceiling).min(load);
            load > constraint.limit
        });
        if drain.ceilings.is_empty() {
            self.pending_soft_bc = None;
        }
    }

    fn check_lsp_shape(&self, lsp: &Lsp) -> Result<(), NetError> {
        if lsp.class_index >= self.classes.len() {
            return Err(NetError::UnknownClass(lsp.class_index));
        }
        if lsp.path.is_empty() {
            return Err(NetError::EmptyPath(lsp.id));
        }
        if let Some(&bad) = lsp
            .path
            .iter()
            .find(|l| l.index() >= self.topology.links().len())
        {
            return Err(NetError::DisconnectedPath(bad));
        }
        let nodes = self.topology.path_nodes(lsp.source_host, &lsp.path)?;
        if nodes.last() != Some(&lsp.dest_host) {
            return Err(NetError::DisconnectedPath(*lsp.path.last().unwrap()));
        }
        Ok(())
    }
}
