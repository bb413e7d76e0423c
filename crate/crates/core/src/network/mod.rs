//! Network state: topology, traffic classes, bandwidth constraints and the
//! per-link per-class allocation ledger.

mod bc;
mod state;
mod topology;

pub use bc::{BamModel, BcConfig, BcError, BcValue, Constraint, LinkScope, TrafficClass};
pub use state::{
    ClassCounters, LinkLoads, Lsp, LspId, LspState, NetworkState, ReleaseReason, SoftDrain,
};
pub use topology::{
    Link, LinkId, Node, NodeId, NodeKind, Topology, TopologyBuilder, TopologyError,
};

use crate::units::Bandwidth;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum NetError {
    #[error("no route from {src} to {dst}")]
    NoRoute { src: NodeId, dst: NodeId },
    #[error("path is not connected at link {0}")]
    DisconnectedPath(LinkId),
    #[error("{0} has an empty path")]
    EmptyPath(LspId),
    #[error("committing would put {total} Mbps on link {link} (capacity {capacity} Mbps)")]
    CapacityViolation {
        link: LinkId,
        total: Bandwidth,
        capacity: Bandwidth,
    },
    #[error("unknown {0}")]
    UnknownLsp(LspId),
    #[error("{lsp} is {state:?}, not Active")]
    NotActive { lsp: LspId, state: LspState },
    #[error("{0} already registered")]
    DuplicateLsp(LspId),
    #[error("unknown traffic class {0}")]
    UnknownClass(usize),
    #[error("{lsp}: illegal transition {from:?} -> {to:?}")]
    InvalidTransition {
        lsp: LspId,
        from: LspState,
        to: LspState,
    },
}
