//! Full-rescan consistency checks used by the runner's verification mode and
//! by tests. Each check recomputes from scratch what the incremental code
//! maintains.

use std::collections::BTreeSet;

use crate::controller::Controller;
use crate::fabric::{Action, Fabric};
use crate::network::{LinkLoads, LspState, NetworkState};

/// Per-link per-class loads equal the sum of active demands.
pub fn check_conservation(state: &NetworkState) -> Result<(), String> {
    let topology = state.topology();
    let mut expected = LinkLoads::new(topology.links().len(), state.classes().len());
    for lsp in state.lsps().filter(|l| l.state == LspState::Active) {
        expected.add(&lsp.path, lsp.class_index, lsp.demand);
    }
    if &expected != state.loads() {
        return Err("link loads differ from the sum of active LSP demands".into());
    }
    let active: BTreeSet<_> = state
        .lsps()
        .filter(|l| l.state == LspState::Active)
        .map(|l| l.id)
        .collect();
    if &active != state.active_ids() {
        return Err("active index differs from LSP states".into());
    }
    Ok(())
}

/// Capacity and bandwidth constraints hold on every link. Constraints still
/// draining after a soft reconfiguration may exceed their limit up to the
/// recorded ceiling.
pub fn check_constraints(state: &NetworkState) -> Result<(), String> {
    let config = state.bc_config();
    let drain = state.pending_soft_bc();
    for link in state.topology().links() {
        let alloc = state.alloc(link.id);
        let total = state.loads().total(link.id);
        if total > link.capacity {
            return Err(format!(
                "link {} carries {total} Mbps over capacity {}",
                link.name, link.capacity
            ));
        }
        for (idx, c) in config.constraints(link).into_iter().enumerate() {
            let load = c.load(alloc);
            if load <= c.limit {
                continue;
            }
            let ceiling = drain.and_then(|d| d.ceilings.get(&(link.id, idx)));
            match ceiling {
                Some(&ceiling) if load <= ceiling => {}
                _ => {
                    return Err(format!(
                        "link {}: classes {:?} carry {load} Mbps over limit {}",
                        link.name, c.classes, c.limit
                    ))
                }
            }
        }
    }
    Ok(())
}

/// Forward rules correspond one to one with (switch on path, active LSP).
pub fn check_fabric(state: &NetworkState, fabric: &Fabric) -> Result<(), String> {
    let topology = state.topology();
    let mut expected = BTreeSet::new();
    for lsp in state.active_lsps() {
        let nodes = topology
            .path_nodes(lsp.source_host, &lsp.path)
            .map_err(|e| e.to_string())?;
        for (node, link) in nodes.iter().zip(&lsp.path) {
            if topology.node(*node).is_switch() {
                let port = fabric.port(*node, *link).map_err(|e| e.to_string())?;
                expected.insert((*node, lsp.id, port));
            }
        }
    }
    let mut actual = BTreeSet::new();
    for rule in fabric.rules() {
        let Action::Forward { out_port } = rule.action else {
            continue;
        };
        let Some(owner) = rule.owner else {
            return Err(format!("forward rule without owner on {}", rule.switch));
        };
        if !actual.insert((rule.switch, owner, out_port)) {
            return Err(format!("{owner} has two rules on {}", rule.switch));
        }
    }
    if expected != actual {
        let missing = expected.difference(&actual).next();
        let extra = actual.difference(&expected).next();
        return Err(format!(
            "fabric out of sync: missing {missing:?}, unexpected {extra:?}"
        ));
    }
    if fabric.rule_count() != actual.len() {
        return Err("installed rule count disagrees with the tables".into());
    }
    Ok(())
}

pub fn check_state(state: &NetworkState) -> Result<(), String> {
    check_conservation(state)?;
    check_constraints(state)
}

pub fn check(controller: &Controller) -> Result<(), String> {
    check_state(controller.state())?;
    check_fabric(controller.state(), controller.fabric())
}
