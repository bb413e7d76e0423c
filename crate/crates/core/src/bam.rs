//! The bandwidth-allocation-model decision engine.
//!
//! Admission is checked on every link of the requested path against the
//! constraint system of the configured model. Under RDM a request that is
//! infeasible only because lower-priority classes borrowed headroom is
//! granted after preempting victims from those classes. BC reconfiguration
//! comes in a hard flavour (preempt until the new constraints hold) and a
//! soft one (new constraints apply to admissions only, existing LSPs drain).

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet};
use std::ops::{Range, RangeInclusive};

use crate::network::{
    BamModel, BcConfig, BcError, LinkId, Lsp, LspId, NetError, NetworkState, ReleaseReason,
    SoftDrain,
};
use crate::units::{Bandwidth, SimTime};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Verdict {
    Grant,
    GrantWithPreemption,
    Deny,
}

/// The broker's answer to one LSP request.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdmissionDecision {
    pub verdict: Verdict,
    /// Non-empty iff `verdict` is `GrantWithPreemption`.
    pub victims: Vec<LspId>,
}

impl AdmissionDecision {
    pub fn grant() -> Self {
        AdmissionDecision {
            verdict: Verdict::Grant,
            victims: Vec::new(),
        }
    }

    pub fn deny() -> Self {
        AdmissionDecision {
            verdict: Verdict::Deny,
            victims: Vec::new(),
        }
    }

    fn with_victims(victims: Vec<LspId>) -> Self {
        if victims.is_empty() {
            Self::grant()
        } else {
            AdmissionDecision {
                verdict: Verdict::GrantWithPreemption,
                victims,
            }
        }
    }

    pub fn is_granted(&self) -> bool {
        self.verdict != Verdict::Deny
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ReconfigMode {
    Hard,
    Soft,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReconfigEvent {
    pub new_bc: BcConfig,
    pub mode: ReconfigMode,
    pub trigger_time: SimTime,
}

/// Excess load over one constraint of one link.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Deficit {
    pub link: LinkId,
    /// Position of the constraint in `BcConfig::constraints` for the link.
    pub constraint: usize,
    pub classes: RangeInclusive<usize>,
    pub load: Bandwidth,
    pub excess: Bandwidth,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BamError {
    #[error("no eligible victim set restores feasibility")]
    Infeasible,
    #[error("invalid bandwidth constraints: {0}")]
    InvalidBc(#[from] BcError),
    #[error(transparent)]
    Net(#[from] NetError),
}

/// Deficits that admitting `demand` of class `class` on `path` would cause
/// under `config`. Only constraints covering `class` are considered.
pub fn request_deficits(
    state: &NetworkState,
    config: &BcConfig,
    path: &[LinkId],
    class: usize,
    demand: Bandwidth,
) -> Vec<Deficit> {
    let links: BTreeSet<LinkId> = path.iter().copied().collect();
    let mut out = Vec::new();
    for link in links {
        let alloc = state.alloc(link);
        for (idx, constraint) in config
            .constraints(state.topology().link(link))
            .into_iter()
            .enumerate()
        {
            if !constraint.classes.contains(&class) {
                continue;
            }
            let load = constraint.load(alloc) + demand;
            if load > constraint.limit {
                out.push(Deficit {
                    link,
                    constraint: idx,
                    classes: constraint.classes,
                    load,
                    excess: load - constraint.limit,
                });
            }
        }
    }
    out
}

/// Deficits of the current allocation against `config` on every link.
pub fn config_deficits(state: &NetworkState, config: &BcConfig) -> Vec<Deficit> {
    let mut out = Vec::new();
    for link in state.topology().links() {
        let alloc = state.alloc(link.id);
        for (idx, constraint) in config.constraints(link).into_iter().enumerate() {
            let load = constraint.load(alloc);
            if load > constraint.limit {
                out.push(Deficit {
                    link: link.id,
                    constraint: idx,
                    classes: constraint.classes,
                    load,
                    excess: load - constraint.limit,
                });
            }
        }
    }
    out
}

fn as_model(config: &BcConfig, model: BamModel) -> BcConfig {
    BcConfig {
        model,
        ..config.clone()
    }
}

/// MAM admission: grant iff every path link keeps `alloc[c] + d <= BC_c` and
/// stays within capacity. MAM never preempts.
pub fn check_mam(
    state: &NetworkState,
    path: &[LinkId],
    class: usize,
    demand: Bandwidth,
) -> AdmissionDecision {
    let config = as_model(state.bc_config(), BamModel::Mam);
    if request_deficits(state, &config, path, class, demand).is_empty() {
        AdmissionDecision::grant()
    } else {
        AdmissionDecision::deny()
    }
}

/// RDM admission: for every `b <= c`, `sum_{k>=b} alloc[k] + d <= BC_b` on
/// every path link. Violations that lower-priority classes can make room
/// for yield a preemption grant.
pub fn check_rdm(
    state: &NetworkState,
    path: &[LinkId],
    class: usize,
    demand: Bandwidth,
) -> AdmissionDecision {
    let config = as_model(state.bc_config(), BamModel::Rdm);
    let deficits = request_deficits(state, &config, path, class, demand);
    if deficits.is_empty() {
        return AdmissionDecision::grant();
    }
    match select_victims(state, &deficits, 0..class) {
        Ok(victims) => AdmissionDecision::with_victims(victims),
        Err(_) => AdmissionDecision::deny(),
    }
}

/// Dispatches on the configured model.
pub fn decide(
    state: &NetworkState,
    path: &[LinkId],
    class: usize,
    demand: Bandwidth,
) -> AdmissionDecision {
    match state.bc_config().model {
        BamModel::Mam => check_mam(state, path, class, demand),
        BamModel::Rdm => check_rdm(state, path, class, demand),
    }
}

fn relieves(lsp: &Lsp, deficit: &Deficit) -> bool {
    deficit.classes.contains(&lsp.class_index) && lsp.traverses(deficit.link)
}

/// Chooses Active LSPs whose removal clears every deficit.
///
/// Candidates come from classes in `eligible` and must cross a deficit link
/// in a constraint covering their class. They are taken lowest class first,
/// newest admission first within a class, skipping any that no longer
/// relieves an open deficit. A reverse pass then drops every victim the
/// others already cover, so no victim is redundant.
pub fn select_victims(
    state: &NetworkState,
    deficits: &[Deficit],
    eligible: Range<usize>,
) -> Result<Vec<LspId>, BamError> {
    let mut excess: Vec<i128> = deficits
        .iter()
        .map(|d| i128::from(d.excess.kbps()))
        .collect();
    if excess.iter().all(|&e| e <= 0) {
        return Ok(Vec::new());
    }
    let mut candidates: Vec<&Lsp> = state
        .active_lsps()
        .filter(|l| eligible.contains(&l.class_index))
        .filter(|l| deficits.iter().any(|d| relieves(l, d)))
        .collect();
    candidates.sort_by_key(|l| (l.class_index, Reverse(l.admit_seq)));

    let mut chosen: Vec<&Lsp> = Vec::new();
    for lsp in candidates {
        if excess.iter().all(|&e| e <= 0) {
            break;
        }
        let useful = deficits
            .iter()
            .zip(&excess)
            .any(|(d, &e)| e > 0 && relieves(lsp, d));
        if !useful {
            continue;
        }
        let freed = i128::from(lsp.demand.kbps());
        for (d, e) in deficits.iter().zip(excess.iter_mut()) {
            if relieves(lsp, d) {
                *e -= freed;
            }
        }
        chosen.push(lsp);
    }
    if excess.iter().any(|&e| e > 0) {
        return Err(BamError::Infeasible);
    }

    for i in (0..chosen.len()).rev() {
        let lsp = chosen[i];
        let freed = i128::from(lsp.demand.kbps());
        let redundant = deficits
            .iter()
            .zip(&excess)
            .all(|(d, &e)| !relieves(lsp, d) || e + freed <= 0);
        if redundant {
            for (d, e) in deficits.iter().zip(excess.iter_mut()) {
                if relieves(lsp, d) {
                    *e += freed;
                }
            }
            chosen.remove(i);
        }
    }
    Ok(chosen.into_iter().map(|l| l.id).collect())
}

/// Installs `event.new_bc`. Hard mode preempts until the new constraints hold
/// and returns the victims; soft mode preempts nothing and lets the
/// over-allocated classes drain through normal completions.
pub fn reconfigure(
    state: &mut NetworkState,
    event: &ReconfigEvent,
) -> Result<Vec<LspId>, BamError> {
    event
        .new_bc
        .validate(state.topology(), state.classes().len())?;
    let deficits = config_deficits(state, &event.new_bc);
    match event.mode {
        ReconfigMode::Hard => {
            let victims = select_victims(state, &deficits, 0..state.classes().len())?;
            state.set_bc_config(event.new_bc.clone());
            state.set_soft_drain(None);
            for &victim in &victims {
                state.release(victim, ReleaseReason::Preempted, event.trigger_time)?;
            }
            Ok(victims)
        }
        ReconfigMode::Soft => {
            let ceilings: BTreeMap<(LinkId, usize), Bandwidth> = deficits
                .iter()
                .map(|d| ((d.link, d.constraint), d.load))
                .collect();
            state.set_bc_config(event.new_bc.clone());
            state.set_soft_drain(if ceilings.is_empty() {
                None
            } else {
                Some(SoftDrain {
                    config: event.new_bc.clone(),
                    ceilings,
                })
            });
            Ok(Vec::new())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{NodeId, Topology, TrafficClass};

    struct Fixture {
        state: NetworkState,
        a: NodeId,
        b: NodeId,
        link: LinkId,
        next: u64,
    }

    impl Fixture {
        fn new(model: BamModel, bc: &[u64]) -> Self {
            let topo = Topology::builder()
                .switch("A")
                .switch("B")
                .link("ab", "A", "B", Bandwidth::from_mbps(500))
                .build()
                .unwrap();
            let a = topo.node_by_name("A").unwrap();
            let b = topo.node_by_name("B").unwrap();
            let link = topo.link_by_name("ab").unwrap();
            let classes = [5, 10, 20]
                .iter()
                .enumerate()
                .map(|(i, &m)| TrafficClass {
                    index: i,
                    max_lsp_bandwidth: Bandwidth::from_mbps(m),
                })
                .collect();
            let state = NetworkState::new(topo, classes, BcConfig::mbps(model, bc));
            Fixture {
                state,
                a,
                b,
                link,
                next: 0,
            }
        }

        fn fill(&mut self, class: usize, mbps: u64, count: usize) -> Vec<LspId> {
            (0..count)
                .map(|_| {
                    let id = LspId(self.next);
                    self.next += 1;
                    let lsp = Lsp::new(
                        id,
                        class,
                        Bandwidth::from_mbps(mbps),
                        vec![self.link],
                        self.a,
                        self.b,
                        SimTime::ZERO,
                        SimTime::from_secs(300),
                    );
                    self.state.commit(lsp, SimTime::ZERO).unwrap()
                })
                .collect()
        }

        fn check(&self, class: usize, mbps: u64) -> AdmissionDecision {
            decide(&self.state, &[self.link], class, Bandwidth::from_mbps(mbps))
        }
    }

    #[test]
    fn mam_denies_ct0_at_bc0() {
        let mut f = Fixture::new(BamModel::Mam, &[250, 150, 100]);
        f.fill(0, 5, 50);
        f.fill(1, 10, 7);
        assert_eq!(f.check(0, 5), AdmissionDecision::deny());
        assert!(f.check(1, 10).is_granted());
    }

    #[test]
    fn mam_grants_ct2_on_empty_link() {
        let f = Fixture::new(BamModel::Mam, &[250, 150, 100]);
        assert_eq!(f.check(2, 20), AdmissionDecision::grant());
    }

    #[test]
    fn mam_denies_at_248_plus_5() {
        // 248 needs a 1 Mbps granularity, so build it from mixed demands.
        let mut f = Fixture::new(BamModel::Mam, &[250, 150, 100]);
        f.fill(0, 4, 62);
        assert_eq!(f.state.alloc(f.link)[0], Bandwidth::from_mbps(248));
        assert_eq!(f.check(0, 5), AdmissionDecision::deny());
        assert!(f.check(0, 2).is_granted());
    }

    #[test]
    fn rdm_ct1_preempts_two_newest_ct0() {
        let mut f = Fixture::new(BamModel::Rdm, &[500, 250, 100]);
        let ct0 = f.fill(0, 5, 100);
        let d = f.check(1, 10);
        assert_eq!(d.verdict, Verdict::GrantWithPreemption);
        assert_eq!(d.victims, vec![ct0[99], ct0[98]]);
    }

    #[test]
    fn rdm_grants_on_empty() {
        let f = Fixture::new(BamModel::Rdm, &[500, 250, 100]);
        assert_eq!(f.check(0, 5), AdmissionDecision::grant());
    }

    #[test]
    fn rdm_nested_sums() {
        let mut f = Fixture::new(BamModel::Rdm, &[500, 250, 100]);
        f.fill(1, 10, 24);
        f.fill(2, 20, 5);
        assert_eq!(
            f.state.alloc(f.link),
            &[
                Bandwidth::ZERO,
                Bandwidth::from_mbps(240),
                Bandwidth::from_mbps(100)
            ]
        );
        // BC1 caps CT1 + CT2: 240 + 100 + 10 = 350 > 250.
        assert_eq!(f.check(1, 10), AdmissionDecision::deny());
        // CT2: 100 + 20 > BC2 = 100 and nothing below CT2 can help.
        assert_eq!(f.check(2, 20), AdmissionDecision::deny());
    }

    #[test]
    fn rdm_ct1_fits_exactly_at_bc1() {
        let mut f = Fixture::new(BamModel::Rdm, &[500, 250, 100]);
        f.fill(1, 10, 24);
        // S1 = 240 + 10 = 250 <= 250, S0 = 250 <= 500.
        assert_eq!(f.check(1, 10), AdmissionDecision::grant());
    }

    #[test]
    fn purity() {
        let mut f = Fixture::new(BamModel::Rdm, &[500, 250, 100]);
        f.fill(0, 5, 100);
        let before = f.state.loads().clone();
        let d1 = f.check(1, 10);
        let d2 = f.check(1, 10);
        assert_eq!(d1, d2);
        assert_eq!(f.state.loads(), &before);
    }

    /// Smallest subset size of `pool` (all the same demand) covering `need`.
    fn min_subset_covering(pool: &[u64], need: u64) -> Option<usize> {
        let n = pool.len();
        (0u32..(1 << n))
            .filter(|mask| {
                let sum: u64 = (0..n)
                    .filter(|i| mask & (1 << i) != 0)
                    .map(|i| pool[i])
                    .sum();
                sum >= need
            })
            .map(|mask| mask.count_ones() as usize)
            .min()
    }

    #[test]
    fn victims_for_10_mbps_deficit() {
        let mut f = Fixture::new(BamModel::Rdm, &[500, 250, 100]);
        let ids = f.fill(0, 5, 6);
        let deficits = vec![Deficit {
            link: f.link,
            constraint: 0,
            classes: 0..=2,
            load: Bandwidth::from_mbps(510),
            excess: Bandwidth::from_mbps(10),
        }];
        let v = select_victims(&f.state, &deficits, 0..1).unwrap();
        assert_eq!(Some(v.len()), min_subset_covering(&[5; 6], 10));
        assert_eq!(v, vec![ids[5], ids[4]]);
    }

    #[test]
    fn zero_deficit_means_no_victims() {
        let mut f = Fixture::new(BamModel::Rdm, &[500, 250, 100]);
        f.fill(0, 5, 3);
        assert!(select_victims(&f.state, &[], 0..1).unwrap().is_empty());
    }

    #[test]
    fn forced_single_victim() {
        let mut f = Fixture::new(BamModel::Rdm, &[500, 250, 100]);
        let ids = f.fill(0, 5, 1);
        let deficits = vec![Deficit {
            link: f.link,
            constraint: 0,
            classes: 0..=2,
            load: Bandwidth::from_mbps(505),
            excess: Bandwidth::from_mbps(5),
        }];
        assert_eq!(select_victims(&f.state, &deficits, 0..1).unwrap(), ids);
    }

    #[test]
    fn infeasible_victim_set() {
        let mut f = Fixture::new(BamModel::Rdm, &[500, 250, 100]);
        f.fill(0, 5, 1);
        let deficits = vec![Deficit {
            link: f.link,
            constraint: 0,
            classes: 0..=2,
            load: Bandwidth::from_mbps(510),
            excess: Bandwidth::from_mbps(10),
        }];
        assert_eq!(
            select_victims(&f.state, &deficits, 0..1),
            Err(BamError::Infeasible)
        );
    }

    #[test]
    fn redundant_low_class_victims_are_pruned() {
        // CT2 request needs 10 Mbps out of BC1 (only CT1 helps) and 5 Mbps
        // out of BC0; the CT1 victim covers both, so no CT0 LSP goes.
        let mut f = Fixture::new(BamModel::Rdm, &[500, 250, 100]);
        f.fill(0, 5, 50);
        let ct1 = f.fill(1, 10, 23);
        f.fill(2, 20, 1);
        // S0 = 250 + 230 + 20 = 500, S1 = 250, S2 = 20.
        let d = f.check(2, 20);
        assert_eq!(d.verdict, Verdict::GrantWithPreemption);
        assert_eq!(d.victims, vec![ct1[22], ct1[21]]);
    }

    fn event(model: BamModel, bc: &[u64], mode: ReconfigMode) -> ReconfigEvent {
        ReconfigEvent {
            new_bc: BcConfig::mbps(model, bc),
            mode,
            trigger_time: SimTime::from_secs(10),
        }
    }

    #[test]
    fn soft_reconfig_never_preempts() {
        let mut f = Fixture::new(BamModel::Mam, &[350, 50, 100]);
        f.fill(0, 5, 70);
        let v = reconfigure(
            &mut f.state,
            &event(BamModel::Mam, &[250, 150, 100], ReconfigMode::Soft),
        )
        .unwrap();
        assert!(v.is_empty());
        assert_eq!(f.state.alloc(f.link)[0], Bandwidth::from_mbps(350));
        assert!(f.state.pending_soft_bc().is_some());
        assert_eq!(f.check(0, 5), AdmissionDecision::deny());
    }

    #[test]
    fn hard_reconfig_to_same_bc_is_noop() {
        let mut f = Fixture::new(BamModel::Mam, &[250, 150, 100]);
        f.fill(0, 5, 50);
        let before = f.state.loads().clone();
        let v = reconfigure(
            &mut f.state,
            &event(BamModel::Mam, &[250, 150, 100], ReconfigMode::Hard),
        )
        .unwrap();
        assert!(v.is_empty());
        assert_eq!(f.state.loads(), &before);
    }

    #[test]
    fn hard_reconfig_evicts_ten_newest_ct0() {
        let mut f = Fixture::new(BamModel::Mam, &[300, 150, 100]);
        let ct0 = f.fill(0, 5, 60);
        f.fill(1, 10, 5);
        f.fill(2, 20, 5);
        assert_eq!(
            f.state.alloc(f.link),
            &[
                Bandwidth::from_mbps(300),
                Bandwidth::from_mbps(50),
                Bandwidth::from_mbps(100)
            ]
        );
        let excess = 300 - 250;
        let v = reconfigure(
            &mut f.state,
            &event(BamModel::Mam, &[250, 150, 100], ReconfigMode::Hard),
        )
        .unwrap();
        assert_eq!(v.len(), excess / 5);
        let expected: Vec<_> = ct0.iter().rev().take(10).copied().collect();
        assert_eq!(v, expected);
        assert_eq!(f.state.alloc(f.link)[0], Bandwidth::from_mbps(250));
        assert_eq!(f.state.counters()[0].preempted, 10);
    }

    #[test]
    fn reconfig_rejects_invalid_bc() {
        let mut f = Fixture::new(BamModel::Rdm, &[500, 250, 100]);
        let err = reconfigure(
            &mut f.state,
            &event(BamModel::Rdm, &[100, 250, 100], ReconfigMode::Hard),
        );
        assert!(matches!(err, Err(BamError::InvalidBc(_))));
        assert_eq!(
            f.state.bc_config(),
            &BcConfig::mbps(BamModel::Rdm, &[500, 250, 100])
        );
    }

    #[test]
    fn soft_drain_clears_after_completions() {
        let mut f = Fixture::new(BamModel::Mam, &[350, 50, 100]);
        let ct0 = f.fill(0, 5, 52);
        reconfigure(
            &mut f.state,
            &event(BamModel::Mam, &[250, 150, 100], ReconfigMode::Soft),
        )
        .unwrap();
        let headroom = |s: &NetworkState| 250i64 - (s.alloc(f.link)[0].kbps() / 1000) as i64;
        assert_eq!(headroom(&f.state), -10);
        f.state
            .release(ct0[0], ReleaseReason::Completed, SimTime::from_secs(300))
            .unwrap();
        f.state.refresh_soft_drain();
        assert_eq!(headroom(&f.state), -5);
        assert!(f.state.pending_soft_bc().is_some());
        f.state
            .release(ct0[1], ReleaseReason::Completed, SimTime::from_secs(300))
            .unwrap();
        f.state.refresh_soft_drain();
        assert_eq!(headroom(&f.state), 0);
        assert!(f.state.pending_soft_bc().is_none());
    }
}
