use bamsdn::bam::{ReconfigEvent, ReconfigMode};
use bamsdn::controller::{Controller, ControllerError, LspRequest, Outcome};
use bamsdn::fabric::Action;
use bamsdn::network::{BamModel, BcConfig, LspId, LspState, NodeId};
use bamsdn::scenario::{self, ScenarioSpec};
use bamsdn::{Bandwidth, SimTime};

fn spec(model: BamModel, bc: &[u64]) -> ScenarioSpec {
    let mut spec = scenario::bundled("exp1_mam").unwrap();
    spec.initial_bc = BcConfig::mbps(model, bc);
    spec
}

fn node(spec: &ScenarioSpec, name: &str) -> NodeId {
    spec.topology.node_by_name(name).unwrap()
}

struct Rig {
    spec: ScenarioSpec,
    ctl: Controller,
    seq: u64,
}

impl Rig {
    fn new(model: BamModel, bc: &[u64]) -> Self {
        let spec = spec(model, bc);
        let ctl = scenario::build_controller(&spec)
            .unwrap()
            .with_verification(true);
        Rig { spec, ctl, seq: 0 }
    }

    fn request(&mut self, host: &str, class: usize, at: u64) -> (LspRequest, Outcome, Vec<LspId>) {
        let tuple = self
            .spec
            .match_tuple(node(&self.spec, host), class, self.seq)
            .unwrap();
        self.seq += 1;
        let req = LspRequest {
            match_tuple: tuple,
            arrival_time: SimTime::from_secs(at),
            lifetime: SimTime::from_secs(300),
        };
        let report = self.ctl.handle_request(&req).unwrap();
        (req, report.outcome, report.preempted)
    }

    fn fill(&mut self, class: usize, n: usize) -> Vec<LspId> {
        (0..n)
            .map(|_| match self.request("HS1", class, 0).1 {
                Outcome::Established(id) => id,
                Outcome::Blocked => panic!("fill request blocked"),
            })
            .collect()
    }

    fn alloc(&self, class: usize) -> Bandwidth {
        self.ctl.state().alloc(self.spec.bottleneck)[class]
    }

    /// Switches each active LSP crosses, recounted from its path.
    fn expected_rules(&self) -> usize {
        let topo = self.ctl.state().topology();
        self.ctl
            .state()
            .active_lsps()
            .map(|l| {
                let nodes = topo.path_nodes(l.source_host, &l.path).unwrap();
                nodes.iter().filter(|n| topo.node(**n).is_switch()).count()
            })
            .sum()
    }
}

#[test]
fn first_request_installs_rules_on_every_path_switch() {
    let mut rig = Rig::new(BamModel::Mam, &[250, 150, 100]);
    let (req, outcome, _) = rig.request("HS1", 0, 0);
    let Outcome::Established(id) = outcome else {
        panic!("blocked")
    };
    for sw in ["S1", "S2", "S3"] {
        let rule = rig
            .ctl
            .fabric()
            .lookup(node(&rig.spec, sw), &req.match_tuple)
            .unwrap()
            .unwrap();
        assert_eq!(rule.owner, Some(id));
        assert!(matches!(rule.action, Action::Forward { .. }));
    }
    assert_eq!(rig.ctl.fabric().rule_count(), 3);
    assert_eq!(rig.alloc(0), Bandwidth::from_mbps(5));
}

#[test]
fn mam_block_sends_drop_to_ingress() {
    let mut rig = Rig::new(BamModel::Mam, &[250, 150, 100]);
    rig.fill(0, 50);
    assert_eq!(rig.alloc(0), Bandwidth::from_mbps(250));
    let (req, outcome, _) = rig.request("HS1", 0, 1);
    assert_eq!(outcome, Outcome::Blocked);
    let drop = rig.ctl.fabric().drops().last().unwrap();
    assert_eq!(drop.switch, node(&rig.spec, "S1"));
    assert_eq!(drop.match_tuple, req.match_tuple);
    assert_eq!(rig.ctl.fabric().rule_count(), 150);
    assert_eq!(rig.ctl.state().counters()[0].blocked, 1);
}

#[test]
fn rdm_ct1_preempts_two_newest_ct0_and_their_rules() {
    let mut rig = Rig::new(BamModel::Rdm, &[500, 250, 100]);
    let ids = rig.fill(0, 100);
    assert_eq!(
        rig.ctl.state().loads().total(rig.spec.bottleneck),
        Bandwidth::from_mbps(500)
    );
    let (_, outcome, victims) = rig.request("HS2", 1, 1);
    assert!(matches!(outcome, Outcome::Established(_)));
    // 10 Mbps of CT1 over 5 Mbps CT0 LSPs: ceil(10 / 5) victims.
    assert_eq!(victims.len(), 2);
    assert_eq!(victims, vec![ids[99], ids[98]]);
    for v in &victims {
        assert_eq!(rig.ctl.state().lsp(*v).unwrap().state, LspState::Preempted);
        assert!(rig.ctl.fabric().rules().all(|r| r.owner != Some(*v)));
    }
    assert_eq!(rig.ctl.fabric().rule_count(), rig.expected_rules());
    assert_eq!(rig.alloc(0), Bandwidth::from_mbps(490));
    assert_eq!(rig.alloc(1), Bandwidth::from_mbps(10));
}

#[test]
fn expiry_of_only_lsp_returns_to_idle() {
    let mut rig = Rig::new(BamModel::Mam, &[250, 150, 100]);
    let id = rig.fill(0, 1)[0];
    rig.ctl.handle_expiry(id, SimTime::from_secs(300)).unwrap();
    assert_eq!(rig.ctl.fabric().rule_count(), 0);
    for link in rig.spec.topology.links() {
        assert!(rig.ctl.state().loads().total(link.id).is_zero());
    }
    assert!(rig.ctl.state().active_ids().is_empty());
}

#[test]
fn early_expiry_is_rejected() {
    let mut rig = Rig::new(BamModel::Mam, &[250, 150, 100]);
    let id = rig.fill(0, 1)[0];
    let err = rig
        .ctl
        .handle_expiry(id, SimTime::from_secs(299))
        .unwrap_err();
    assert!(matches!(err, ControllerError::PrematureExpiry { .. }));
}

#[test]
fn soft_drain_expiry_restores_headroom_by_demand() {
    let mut rig = Rig::new(BamModel::Mam, &[350, 50, 100]);
    let ids = rig.fill(0, 60);
    let event = ReconfigEvent {
        new_bc: BcConfig::mbps(BamModel::Mam, &[250, 150, 100]),
        mode: ReconfigMode::Soft,
        trigger_time: SimTime::from_secs(1),
    };
    assert!(rig.ctl.apply_reconfig(&event).unwrap().is_empty());
    let headroom = |rig: &Rig| 250 * 1000 - rig.alloc(0).kbps() as i64;
    let before = headroom(&rig);
    assert_eq!(before, -50_000);
    rig.ctl
        .handle_expiry(ids[0], SimTime::from_secs(300))
        .unwrap();
    assert_eq!(headroom(&rig) - before, 5_000);
    assert!(rig.ctl.state().pending_soft_bc().is_some());
}

#[test]
fn simultaneous_expiries_commute() {
    let mut rig = Rig::new(BamModel::Mam, &[250, 150, 100]);
    let ids = rig.fill(0, 2);
    let mut a = rig.ctl.clone();
    let mut b = rig.ctl.clone();
    let t = SimTime::from_secs(300);
    a.handle_expiry(ids[0], t).unwrap();
    a.handle_expiry(ids[1], t).unwrap();
    b.handle_expiry(ids[1], t).unwrap();
    b.handle_expiry(ids[0], t).unwrap();
    assert_eq!(a.state().loads(), b.state().loads());
    assert_eq!(a.fabric().dump(), b.fabric().dump());
    assert_eq!(a.state().counters(), b.state().counters());
}

#[test]
fn hard_reconfig_without_violation_leaves_fabric_alone() {
    let mut rig = Rig::new(BamModel::Mam, &[250, 150, 100]);
    rig.fill(0, 10);
    let dump = rig.ctl.fabric().dump();
    let journal = rig.ctl.fabric().journal().len();
    let event = ReconfigEvent {
        new_bc: BcConfig::mbps(BamModel::Mam, &[200, 200, 100]),
        mode: ReconfigMode::Hard,
        trigger_time: SimTime::from_secs(1),
    };
    assert!(rig.ctl.apply_reconfig(&event).unwrap().is_empty());
    assert_eq!(rig.ctl.fabric().dump(), dump);
    assert_eq!(rig.ctl.fabric().journal().len(), journal);
}

#[test]
fn hard_reconfig_removes_victim_rules() {
    let mut rig = Rig::new(BamModel::Mam, &[350, 50, 100]);
    rig.fill(0, 60);
    let rules = rig.ctl.fabric().rule_count();
    let event = ReconfigEvent {
        new_bc: BcConfig::mbps(BamModel::Mam, &[250, 150, 100]),
        mode: ReconfigMode::Hard,
        trigger_time: SimTime::from_secs(1),
    };
    let victims = rig.ctl.apply_reconfig(&event).unwrap();
    // (300 - 250) / 5 victims, each with one rule per switch on its path.
    assert_eq!(victims.len(), 10);
    assert_eq!(rules - rig.ctl.fabric().rule_count(), 10 * 3);
    assert_eq!(rig.ctl.fabric().rule_count(), rig.expected_rules());
    assert_eq!(rig.alloc(0), Bandwidth::from_mbps(250));
}

#[test]
fn soft_reconfig_leaves_fabric_alone() {
    let mut rig = Rig::new(BamModel::Mam, &[350, 50, 100]);
    rig.fill(0, 60);
    let dump = rig.ctl.fabric().dump();
    let event = ReconfigEvent {
        new_bc: BcConfig::mbps(BamModel::Mam, &[250, 150, 100]),
        mode: ReconfigMode::Soft,
        trigger_time: SimTime::from_secs(1),
    };
    assert!(rig.ctl.apply_reconfig(&event).unwrap().is_empty());
    assert_eq!(rig.ctl.fabric().dump(), dump);
    assert_eq!(rig.alloc(0), Bandwidth::from_mbps(300));
}

#[test]
fn unknown_port_fails_classification() {
    let rig = Rig::new(BamModel::Mam, &[250, 150, 100]);
    let mut ctl = rig.ctl.clone();
    let mut tuple = rig.spec.match_tuple(node(&rig.spec, "HS1"), 0, 0).unwrap();
    tuple.dst_port = 80;
    let req = LspRequest {
        match_tuple: tuple,
        arrival_time: SimTime::ZERO,
        lifetime: SimTime::from_secs(1),
    };
    let err = ctl.handle_request(&req).unwrap_err();
    assert!(matches!(err, ControllerError::ClassificationFailure(_)));
    assert!(ctl.state().lsps().next().is_none());
}
