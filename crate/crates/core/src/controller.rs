//! Admission pipeline: classify the request, consult the BAM, then execute
//! the verdict against the fabric.

use std::collections::BTreeMap;
use std::net::Ipv4Addr;
use std::ops::RangeInclusive;

use crate::bam::{self, BamError, ReconfigEvent, Verdict};
use crate::fabric::{Action, Fabric, FabricError, FlowRule, MatchTuple};
use crate::network::{
    LinkId, LinkLoads, Lsp, LspId, LspState, NetError, NetworkState, NodeId, ReleaseReason,
};
use crate::units::SimTime;

/// A PacketIn that asks for a new LSP.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LspRequest {
    pub match_tuple: MatchTuple,
    pub arrival_time: SimTime,
    pub lifetime: SimTime,
}

/// First matching rule decides the class. `None` fields match anything.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassifierRule {
    pub src_ip: Option<Ipv4Addr>,
    pub dst_ip: Option<Ipv4Addr>,
    pub dst_ports: RangeInclusive<u16>,
    pub protocol: Option<u8>,
    pub class: usize,
}

impl ClassifierRule {
    pub fn matches(&self, m: &MatchTuple) -> bool {
        self.src_ip.is_none_or(|ip| ip == m.src_ip)
            && self.dst_ip.is_none_or(|ip| ip == m.dst_ip)
            && self.protocol.is_none_or(|p| p == m.protocol)
            && self.dst_ports.contains(&m.dst_port)
    }
}

/// A precomputed static route with the forwarding hop at each switch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Route {
    pub source: NodeId,
    pub dest: NodeId,
    pub links: Vec<LinkId>,
    /// (switch, out port) for every switch the route leaves through.
    pub hops: Vec<(NodeId, u16)>,
}

impl Route {
    pub fn compute(
        state: &NetworkState,
        fabric: &Fabric,
        source: NodeId,
        dest: NodeId,
    ) -> Result<Route, ControllerError> {
        let topology = state.topology();
        let links = topology.path_for(source, dest)?;
        let nodes = topology.path_nodes(source, &links)?;
        let mut hops = Vec::new();
        for (node, &link) in nodes.iter().zip(&links) {
            if topology.node(*node).is_switch() {
                hops.push((*node, fabric.port(*node, link)?));
            }
        }
        Ok(Route {
            source,
            dest,
            links,
            hops,
        })
    }

    pub fn ingress(&self) -> Option<NodeId> {
        self.hops.first().map(|&(s, _)| s)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ClassifierTable {
    rules: Vec<ClassifierRule>,
    routes: BTreeMap<(Ipv4Addr, Ipv4Addr), Route>,
}

impl ClassifierTable {
    pub fn new(rules: Vec<ClassifierRule>) -> Self {
        ClassifierTable {
            rules,
            routes: BTreeMap::new(),
        }
    }

    pub fn add_route(&mut self, src_ip: Ipv4Addr, dst_ip: Ipv4Addr, route: Route) {
        self.routes.insert((src_ip, dst_ip), route);
    }

    pub fn rules(&self) -> &[ClassifierRule] {
        &self.rules
    }

    pub fn route(&self, src_ip: Ipv4Addr, dst_ip: Ipv4Addr) -> Option<&Route> {
        self.routes.get(&(src_ip, dst_ip))
    }

    pub fn classify(&self, m: &MatchTuple) -> Result<(usize, &Route), ControllerError> {
        let class = self
            .rules
            .iter()
            .find(|r| r.matches(m))
            .map(|r| r.class)
            .ok_or(ControllerError::ClassificationFailure(*m))?;
        let route = self
            .routes
            .get(&(m.src_ip, m.dst_ip))
            .ok_or(ControllerError::ClassificationFailure(*m))?;
        Ok((class, route))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Established(LspId),
    Blocked,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RequestReport {
    pub lsp: LspId,
    pub class: usize,
    pub outcome: Outcome,
    pub preempted: Vec<LspId>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ControllerError {
    #[error("cannot classify {0}")]
    ClassificationFailure(MatchTuple),
    #[error("{lsp} expired at {now} before the end of its lifetime")]
    PrematureExpiry { lsp: LspId, now: SimTime },
    #[error("internal invariant violated: {0}")]
    Invariant(String),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Bam(#[from] BamError),
    #[error(transparent)]
    Fabric(#[from] FabricError),
}

#[derive(Debug, Clone)]
pub struct Controller {
    state: NetworkState,
    fabric: Fabric,
    classifier: ClassifierTable,
    next_lsp: u64,
    verify: bool,
}

impl Controller {
    pub fn new(state: NetworkState, fabric: Fabric, classifier: ClassifierTable) -> Self {
        Controller {
            state,
            fabric,
            classifier,
            next_lsp: 0,
            verify: false,
        }
    }

    /// Enables per-request self checks: decision purity and commit/release
    /// inversion.
    pub fn with_verification(mut self, on: bool) -> Self {
        self.verify = on;
        self
    }

    pub fn state(&self) -> &NetworkState {
        &self.state
    }

    pub fn fabric(&self) -> &Fabric {
        &self.fabric
    }

    pub fn classifier(&self) -> &ClassifierTable {
        &self.classifier
    }

    pub fn handle_request(&mut self, req: &LspRequest) -> Result<RequestReport, ControllerError> {
        let now = req.arrival_time;
        let (class, route) = self.classifier.classify(&req.match_tuple)?;
        let route = route.clone();
        let demand = self
            .state
            .classes()
            .get(class)
            .ok_or(NetError::UnknownClass(class))?
            .max_lsp_bandwidth;
        let id = LspId(self.next_lsp);
        self.next_lsp += 1;
        let lsp = Lsp::new(
            id,
            class,
            demand,
            route.links.clone(),
            route.source,
            route.dest,
            now,
            req.lifetime,
        );

        let decision = bam::decide(&self.state, &route.links, class, demand);
        if self.verify {
            let loads = self.state.loads().clone();
            let again = bam::decide(&self.state, &route.links, class, demand);
            if again != decision || &loads != self.state.loads() {
                return Err(ControllerError::Invariant(format!(
                    "impure decision for {id}"
                )));
            }
        }

        if decision.verdict == Verdict::Deny {
            if let Some(ingress) = route.ingress() {
                self.fabric.send_drop(ingress, req.match_tuple, now)?;
            }
            self.state.record_blocked(lsp, now)?;
            return Ok(RequestReport {
                lsp: id,
                class,
                outcome: Outcome::Blocked,
                preempted: Vec::new(),
            });
        }

        for &victim in &decision.victims {
            self.state.release(victim, ReleaseReason::Preempted, now)?;
            self.fabric.remove_by_owner(victim);
        }
        if self.verify {
            if let Some(v) = decision
                .victims
                .iter()
                .find(|v| self.state.lsp(**v).map(|l| l.state) == Some(LspState::Active))
            {
                return Err(ControllerError::Invariant(format!(
                    "victim {v} still active at grant"
                )));
            }
            self.check_inversion(&route.links, class, demand)?;
        }

        self.state.commit(lsp, now)?;
        for &(switch, out_port) in &route.hops {
            self.fabric.install(FlowRule {
                switch,
                match_tuple: req.match_tuple,
                action: Action::Forward { out_port },
                rate_limit: demand,
                owner: Some(id),
            })?;
        }
        self.state.refresh_soft_drain();
        Ok(RequestReport {
            lsp: id,
            class,
            outcome: Outcome::Established(id),
            preempted: decision.victims,
        })
    }

    /// Completes an LSP whose lifetime elapsed.
    pub fn handle_expiry(&mut self, lsp: LspId, now: SimTime) -> Result<(), ControllerError> {
        let entry = self.state.lsp(lsp).ok_or(NetError::UnknownLsp(lsp))?;
        if let Some(admitted) = entry.admit_time {
            if now < admitted + entry.lifetime {
                return Err(ControllerError::PrematureExpiry { lsp, now });
            }
        }
        self.state.release(lsp, ReleaseReason::Completed, now)?;
        self.fabric.remove_by_owner(lsp);
        self.state.refresh_soft_drain();
        Ok(())
    }

    pub fn apply_reconfig(&mut self, event: &ReconfigEvent) -> Result<Vec<LspId>, ControllerError> {
        let victims = bam::reconfigure(&mut self.state, event)?;
        for &victim in &victims {
            self.fabric.remove_by_owner(victim);
        }
        self.state.refresh_soft_drain();
        Ok(victims)
    }

    fn check_inversion(
        &self,
        path: &[LinkId],
        class: usize,
        demand: crate::units::Bandwidth,
    ) -> Result<(), ControllerError> {
        let mut probe: LinkLoads = self.state.loads().clone();
        probe.add(path, class, demand);
        probe.remove(path, class, demand);
        if &probe != self.state.loads() {
            return Err(ControllerError::Invariant(
                "commit/release do not invert".into(),
            ));
        }
        Ok(())
    }
}
