//! Traffic classes and bandwidth-constraint configurations.

use std::collections::BTreeSet;
use std::fmt;
use std::ops::RangeInclusive;

use crate::units::Bandwidth;

use super::topology::{Link, LinkId, Topology};

/// A traffic class (CT). Higher index means higher priority.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrafficClass {
    pub index: usize,
    pub max_lsp_bandwidth: Bandwidth,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BamModel {
    /// Maximum Allocation Model: private per-class partitions.
    Mam,
    /// Russian Dolls Model: BC_b caps the sum of classes b..N-1.
    Rdm,
}

impl fmt::Display for BamModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BamModel::Mam => "mam",
            BamModel::Rdm => "rdm",
        })
    }
}

/// One bandwidth-constraint value, either absolute or relative to the
/// capacity of each governed link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BcValue {
    Absolute(Bandwidth),
    /// Hundredths of a percent (5000 = 50 %).
    Percent(u32),
}

impl BcValue {
    pub fn resolve(self, capacity: Bandwidth) -> Bandwidth {
        match self {
            BcValue::Absolute(bw) => bw,
            BcValue::Percent(hundredths) => {
                Bandwidth::from_kbps(capacity.kbps() * u64::from(hundredths) / 10_000)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum LinkScope {
    All,
    Only(BTreeSet<LinkId>),
}

impl LinkScope {
    pub fn contains(&self, link: LinkId) -> bool {
        match self {
            LinkScope::All => true,
            LinkScope::Only(set) => set.contains(&link),
        }
    }
}

/// A group of classes whose summed allocation on a link must stay within
/// `limit`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Constraint {
    pub classes: RangeInclusive<usize>,
    pub limit: Bandwidth,
}

impl Constraint {
    pub fn load(&self, alloc: &[Bandwidth]) -> Bandwidth {
        alloc[self.classes.clone()].iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BcError {
    #[error("expected {expected} bandwidth constraints, got {got}")]
    WrongLength { expected: usize, got: usize },
    #[error("BC{index} = {value} Mbps exceeds capacity {capacity} Mbps of link `{link}`")]
    ExceedsCapacity {
        index: usize,
        value: Bandwidth,
        capacity: Bandwidth,
        link: String,
    },
    #[error("RDM constraints must be non-increasing: BC{index} = {value} Mbps > BC{prev} = {prev_value} Mbps on link `{link}`")]
    NotNested {
        index: usize,
        value: Bandwidth,
        prev: usize,
        prev_value: Bandwidth,
        link: String,
    },
    #[error("percentage {0} exceeds 100 %")]
    PercentOutOfRange(u32),
    #[error("BC scope references unknown link {0}")]
    UnknownLink(LinkId),
}

/// Which model governs admission and the per-class constraint vector.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BcConfig {
    pub model: BamModel,
    pub bc: Vec<BcValue>,
    pub applies_to: LinkScope,
}

impl BcConfig {
    pub fn new(model: BamModel, bc: Vec<BcValue>) -> Self {
        BcConfig {
            model,
            bc,
            applies_to: LinkScope::All,
        }
    }

    /// Convenience constructor from whole-Mbps values applied to every link.
    pub fn mbps(model: BamModel, values: &[u64]) -> Self {
        Self::new(
            model,
            values
                .iter()
                .map(|&v| BcValue::Absolute(Bandwidth::from_mbps(v)))
                .collect(),
        )
    }

    pub fn governs(&self, link: LinkId) -> bool {
        self.applies_to.contains(link)
    }

    pub fn limit(&self, index: usize, link: &Link) -> Bandwidth {
        self.bc[index].resolve(link.capacity)
    }

    /// Constraint system on `link`: the model's BC groups (when governed)
    /// followed by the physical capacity over all classes.
    pub fn constraints(&self, link: &Link) -> Vec<Constraint> {
        let n = self.bc.len();
        let mut out = Vec::with_capacity(n + 1);
        if self.governs(link.id) {
            for b in 0..n {
                let classes = match self.model {
                    BamModel::Mam => b..=b,
                    BamModel::Rdm => b..=n - 1,
                };
                out.push(Constraint {
                    classes,
                    limit: self.limit(b, link),
                });
            }
        }
        if n > 0 {
            out.push(Constraint {
                classes: 0..=n - 1,
                limit: link.capacity,
            });
        }
        out
    }

    pub fn validate(&self, topology: &Topology, classes: usize) -> Result<(), BcError> {
        if self.bc.len() != classes {
            return Err(BcError::WrongLength {
                expected: classes,
                got: self.bc.len(),
            });
        }
        for value in &self.bc {
            if let BcValue::Percent(p) = value {
                if *p > 10_000 {
                    return Err(BcError::PercentOutOfRange(*p));
                }
            }
        }
        if let LinkScope::Only(set) = &self.applies_to {
            if let Some(bad) = set.iter().find(|l| l.index() >= topology.links().len()) {
                return Err(BcError::UnknownLink(*bad));
            }
        }
        for link in topology.links().iter().filter(|l| self.governs(l.id)) {
            for b in 0..classes {
                let value = self.limit(b, link);
                if value > link.capacity {
                    return Err(BcError::ExceedsCapacity {
                        index: b,
                        value,
                        capacity: link.capacity,
                        link: link.name.clone(),
                    });
                }
                if self.model == BamModel::Rdm && b > 0 {
                    let prev_value = self.limit(b - 1, link);
                    if value > prev_value {
                        return Err(BcError::NotNested {
                            index: b,
                            value,
                            prev: b - 1,
                            prev_value,
                            link: link.name.clone(),
                        });
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_link() -> Topology {
        Topology::builder()
            .switch("A")
            .switch("B")
            .link("ab", "A", "B", Bandwidth::from_mbps(500))
            .build()
            .unwrap()
    }

    #[test]
    fn percent_resolves_against_capacity() {
        let cap = Bandwidth::from_mbps(500);
        assert_eq!(
            BcValue::Percent(5000).resolve(cap),
            Bandwidth::from_mbps(250)
        );
        assert_eq!(
            BcValue::Percent(3000).resolve(cap),
            Bandwidth::from_mbps(150)
        );
        assert_eq!(
            BcValue::Percent(2000).resolve(cap),
            Bandwidth::from_mbps(100)
        );
    }

    #[test]
    fn rdm_groups_are_nested() {
        let topo = one_link();
        let cfg = BcConfig::mbps(BamModel::Rdm, &[500, 250, 100]);
        let cs = cfg.constraints(&topo.links()[0]);
        assert_eq!(cs[0].classes, 0..=2);
        assert_eq!(cs[1].classes, 1..=2);
        assert_eq!(cs[2].classes, 2..=2);
        assert_eq!(cs[3].limit, Bandwidth::from_mbps(500));
    }

    #[test]
    fn validation() {
        let topo = one_link();
        assert!(BcConfig::mbps(BamModel::Mam, &[250, 150, 100])
            .validate(&topo, 3)
            .is_ok());
        assert!(BcConfig::mbps(BamModel::Rdm, &[500, 250, 100])
            .validate(&topo, 3)
            .is_ok());
        assert!(matches!(
            BcConfig::mbps(BamModel::Rdm, &[250, 500, 100]).validate(&topo, 3),
            Err(BcError::NotNested { .. })
        ));
        assert!(matches!(
            BcConfig::mbps(BamModel::Mam, &[600, 0, 0]).validate(&topo, 3),
            Err(BcError::ExceedsCapacity { .. })
        ));
        assert!(matches!(
            BcConfig::mbps(BamModel::Mam, &[1, 2]).validate(&topo, 3),
            Err(BcError::WrongLength { .. })
        ));
    }
}
