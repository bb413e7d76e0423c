//! In-process stand-in for the OpenFlow switch plane: one flow table per
//! switch, plus a log of ephemeral drop directives sent for blocked flows.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::net::Ipv4Addr;

use crate::network::{LinkId, LspId, NodeId, Topology};
use crate::units::{Bandwidth, SimTime};

/// The header fields a flow is matched on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MatchTuple {
    pub src_ip: Ipv4Addr,
    pub dst_ip: Ipv4Addr,
    pub src_port: u16,
    pub dst_port: u16,
    pub protocol: u8,
}

impl fmt::Display for MatchTuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}:{}->{}:{}/{}",
            self.src_ip, self.src_port, self.dst_ip, self.dst_port, self.protocol
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Action {
    Forward { out_port: u16 },
    Drop,
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Forward { out_port } => write!(f, "forward:{out_port}"),
            Action::Drop => f.write_str("drop"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowRule {
    pub switch: NodeId,
    pub match_tuple: MatchTuple,
    pub action: Action,
    pub rate_limit: Bandwidth,
    pub owner: Option<LspId>,
}

/// A deny directive (PacketOut) sent to an ingress switch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DropDirective {
    pub switch: NodeId,
    pub match_tuple: MatchTuple,
    pub time: SimTime,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum JournalEntry {
    Installed(FlowRule),
    Removed {
        switch: NodeId,
        match_tuple: MatchTuple,
        owner: Option<LspId>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FabricError {
    #[error("switch {switch} already has a rule for {match_tuple}")]
    Conflict {
        switch: NodeId,
        match_tuple: MatchTuple,
    },
    #[error("unknown switch {0}")]
    UnknownSwitch(NodeId),
    #[error("forward rule on {0} has no owner LSP")]
    OrphanForward(NodeId),
    #[error("link {link} is not attached to switch {switch}")]
    NoSuchPort { switch: NodeId, link: LinkId },
}

#[derive(Debug, Clone, Default)]
pub struct Fabric {
    tables: BTreeMap<NodeId, BTreeMap<MatchTuple, FlowRule>>,
    owners: BTreeMap<LspId, Vec<(NodeId, MatchTuple)>>,
    ports: BTreeMap<(NodeId, LinkId), u16>,
    names: BTreeMap<NodeId, String>,
    drops: Vec<DropDirective>,
    journal: Vec<JournalEntry>,
}

impl Fabric {
    /// Creates an empty table for every switch. Ports are numbered from 1 in
    /// link-id order of each switch's incident links.
    pub fn new(topology: &Topology) -> Self {
        let mut fabric = Fabric::default();
        for switch in topology.switches() {
            fabric.tables.insert(switch.id, BTreeMap::new());
            fabric.names.insert(switch.id, switch.name.clone());
            for (i, &link) in topology.incident(switch.id).iter().enumerate() {
                fabric.ports.insert((switch.id, link), i as u16 + 1);
            }
        }
        fabric
    }

    pub fn port(&self, switch: NodeId, link: LinkId) -> Result<u16, FabricError> {
        self.ports
            .get(&(switch, link))
            .copied()
            .ok_or(FabricError::NoSuchPort { switch, link })
    }

    /// FlowMod add.
    pub fn install(&mut self, rule: FlowRule) -> Result<(), FabricError> {
        if matches!(rule.action, Action::Forward { .. }) && rule.owner.is_none() {
            return Err(FabricError::OrphanForward(rule.switch));
        }
        let table = self
            .tables
            .get_mut(&rule.switch)
            .ok_or(FabricError::UnknownSwitch(rule.switch))?;
        if table.contains_key(&rule.match_tuple) {
            return Err(FabricError::Conflict {
                switch: rule.switch,
                match_tuple: rule.match_tuple,
            });
        }
        table.insert(rule.match_tuple, rule.clone());
        if let Some(owner) = rule.owner {
            self.owners
                .entry(owner)
                .or_default()
                .push((rule.switch, rule.match_tuple));
        }
        self.journal.push(JournalEntry::Installed(rule));
        Ok(())
    }

    /// FlowMod delete of every rule owned by `lsp`. Returns how many went.
    pub fn remove_by_owner(&mut self, lsp: LspId) -> usize {
        let Some(entries) = self.owners.remove(&lsp) else {
            return 0;
        };
        let mut removed = 0;
        for (switch, match_tuple) in entries {
            if let Some(table) = self.tables.get_mut(&switch) {
                if table.remove(&match_tuple).is_some() {
                    removed += 1;
                    self.journal.push(JournalEntry::Removed {
                        switch,
                        match_tuple,
                        owner: Some(lsp),
                    });
                }
            }
        }
        removed
    }

    pub fn lookup(
        &self,
        switch: NodeId,
        match_tuple: &MatchTuple,
    ) -> Result<Option<&FlowRule>, FabricError> {
        let table = self
            .tables
            .get(&switch)
            .ok_or(FabricError::UnknownSwitch(switch))?;
        Ok(table.get(match_tuple))
    }

    /// PacketOut with a drop action; not persisted in any table.
    pub fn send_drop(
        &mut self,
        switch: NodeId,
        match_tuple: MatchTuple,
        time: SimTime,
    ) -> Result<(), FabricError> {
        if !self.tables.contains_key(&switch) {
            return Err(FabricError::UnknownSwitch(switch));
        }
        self.drops.push(DropDirective {
            switch,
            match_tuple,
            time,
        });
        Ok(())
    }

    pub fn drops(&self) -> &[DropDirective] {
        &self.drops
    }

    pub fn journal(&self) -> &[JournalEntry] {
        &self.journal
    }

    pub fn rule_count(&self) -> usize {
        self.tables.values().map(BTreeMap::len).sum()
    }

    pub fn table(&self, switch: NodeId) -> Option<&BTreeMap<MatchTuple, FlowRule>> {
        self.tables.get(&switch)
    }

    pub fn rules(&self) -> impl Iterator<Item = &FlowRule> {
        self.tables.values().flat_map(BTreeMap::values)
    }

    /// `switch<TAB>match<TAB>action<TAB>rate<TAB>owner`, one line per rule.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for rule in self.rules() {
            let name = self
                .names
                .get(&rule.switch)
                .map(String::as_str)
                .unwrap_or("?");
            let owner = rule
                .owner
                .map(|o| o.to_string())
                .unwrap_or_else(|| "-".into());
            let _ = writeln!(
                out,
                "{name}\t{}\t{}\t{}\t{owner}",
                rule.match_tuple, rule.action, rule.rate_limit
            );
        }
        out
    }
}
