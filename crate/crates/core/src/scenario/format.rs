//! Line-oriented scenario files.
//!
//! ```text
//! # comment
//! [topology]
//! host HS1 10.0.0.1
//! switch S1
//! link L1 HS1 S1 500          # capacity in Mbps
//! bottleneck L1
//! [classes]
//! class 0 5 5000-5999         # index, max LSP Mbps, destination ports
//! [bc]
//! model mam                   # or rdm
//! bc 350 50 100               # Mbps, or percentages such as 70%
//! links all                   # or a list of link names
//! [reconfig]
//! after_request 250 hard 250 150 100
//! at_time 120.5 soft 250 150 100
//! [demand]
//! demand HS1 0 300 0          # host, class, count, start cycle
//! [run]
//! name exp2
//! destination D
//! cycles 10
//! cycle_length 300            # seconds
//! lsp_lifetime 300            # seconds
//! seed 1
//! stop 770
//! window 100
//! protocol 6
//! ```

use std::collections::BTreeSet;
use std::net::Ipv4Addr;
use std::str::FromStr;

use crate::bam::ReconfigMode;
use crate::controller::ClassifierRule;
use crate::network::{BamModel, BcConfig, BcValue, LinkScope, Topology, TrafficClass};
use crate::units::{Bandwidth, SimTime};

use super::{DemandEntry, ReconfigSpec, ScenarioError, ScenarioSpec, Trigger};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Section {
    Topology,
    Classes,
    Bc,
    Reconfig,
    Demand,
    Run,
}

struct RawReconfig {
    trigger: Trigger,
    mode: ReconfigMode,
    values: Vec<BcValue>,
}

struct RawDemand {
    line: usize,
    host: String,
    class: usize,
    count: u64,
    start_cycle: u32,
}

#[derive(Default)]
struct Raw {
    topology: Option<crate::network::TopologyBuilder>,
    bottleneck: Option<(usize, String)>,
    classes: Vec<(usize, TrafficClass, std::ops::RangeInclusive<u16>)>,
    model: Option<BamModel>,
    bc: Option<Vec<BcValue>>,
    links: Option<(usize, Vec<String>)>,
    reconfigs: Vec<RawReconfig>,
    demand: Vec<RawDemand>,
    name: Option<String>,
    destination: Option<(usize, String)>,
    cycles: Option<u32>,
    cycle_length: Option<SimTime>,
    lsp_lifetime: Option<SimTime>,
    seed: Option<u64>,
    stop: Option<u64>,
    window: Option<u64>,
    protocol: Option<u8>,
    seen_keys: BTreeSet<&'static str>,
}

fn err(line: usize, field: &str, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Parse {
        line,
        field: field.to_string(),
        message: message.into(),
    }
}

fn num<T: FromStr>(line: usize, field: &str, text: &str) -> Result<T, ScenarioError> {
    text.parse()
        .map_err(|_| err(line, field, format!("`{text}` is not a valid number")))
}

fn mbps(line: usize, field: &str, text: &str) -> Result<Bandwidth, ScenarioError> {
    Bandwidth::parse_mbps(text)
        .ok_or_else(|| err(line, field, format!("`{text}` is not a bandwidth in Mbps")))
}

fn secs(line: usize, field: &str, text: &str) -> Result<SimTime, ScenarioError> {
    SimTime::parse_secs(text).ok_or_else(|| {
        err(
            line,
            field,
            format!("`{text}` is not a duration in seconds"),
        )
    })
}

fn bc_value(line: usize, text: &str) -> Result<BcValue, ScenarioError> {
    match text.strip_suffix('%') {
        Some(pct) => {
            // Percentages accept up to two decimals and are kept in hundredths.
            let (whole, frac) = pct.split_once('.').unwrap_or((pct, ""));
            if frac.len() > 2 || whole.is_empty() || !frac.chars().all(|c| c.is_ascii_digit()) {
                return Err(err(line, "bc", format!("`{text}` is not a percentage")));
            }
            let whole: u32 = num(line, "bc", whole)?;
            let frac: u32 = if frac.is_empty() {
                0
            } else {
                num(line, "bc", &format!("{frac:0<2}"))?
            };
            let value = whole
                .checked_mul(100)
                .and_then(|w| w.checked_add(frac))
                .ok_or_else(|| err(line, "bc", format!("`{text}` is out of range")))?;
            Ok(BcValue::Percent(value))
        }
        None => Ok(BcValue::Absolute(mbps(line, "bc", text)?)),
    }
}

fn expect_args<'a>(
    line: usize,
    key: &str,
    args: &'a [&'a str],
    n: usize,
) -> Result<&'a [&'a str], ScenarioError> {
    if args.len() != n {
        return Err(err(
            line,
            key,
            format!("expected {n} value(s), got {}", args.len()),
        ));
    }
    Ok(args)
}

fn mode(line: usize, text: &str) -> Result<ReconfigMode, ScenarioError> {
    match text {
        "hard" => Ok(ReconfigMode::Hard),
        "soft" => Ok(ReconfigMode::Soft),
        other => Err(err(
            line,
            "mode",
            format!("expected `hard` or `soft`, got `{other}`"),
        )),
    }
}

impl Raw {
    fn once(&mut self, line: usize, key: &'static str) -> Result<(), ScenarioError> {
        if !self.seen_keys.insert(key) {
            return Err(err(line, key, "given more than once"));
        }
        Ok(())
    }

    fn directive(
        &mut self,
        section: Section,
        line: usize,
        key: &str,
        args: &[&str],
    ) -> Result<(), ScenarioError> {
        match (section, key) {
            (Section::Topology, "host") => {
                let a = expect_args(line, key, args, 2)?;
                let ip: Ipv4Addr = a[1]
                    .parse()
                    .map_err(|_| err(line, "host", format!("`{}` is not an IPv4 address", a[1])))?;
                let b = self.topology.take().unwrap_or_default();
                self.topology = Some(b.host(a[0], ip));
            }
            (Section::Topology, "switch") => {
                let a = expect_args(line, key, args, 1)?;
                let b = self.topology.take().unwrap_or_default();
                self.topology = Some(b.switch(a[0]));
            }
            (Section::Topology, "link") => {
                let a = expect_args(line, key, args, 4)?;
                let cap = mbps(line, "link", a[3])?;
                let b = self.topology.take().unwrap_or_default();
                self.topology = Some(b.link(a[0], a[1], a[2], cap));
            }
            (Section::Topology, "bottleneck") => {
                self.once(line, "bottleneck")?;
                let a = expect_args(line, key, args, 1)?;
                self.bottleneck = Some((line, a[0].to_string()));
            }
            (Section::Classes, "class") => {
                let a = expect_args(line, key, args, 3)?;
                let index: usize = num(line, "class", a[0])?;
                let max = mbps(line, "class", a[1])?;
                let (lo, hi) = a[2].split_once('-').unwrap_or((a[2], a[2]));
                let ports = num::<u16>(line, "class", lo)?..=num::<u16>(line, "class", hi)?;
                if self.classes.iter().any(|(_, c, _)| c.index == index) {
                    return Err(err(line, "class", format!("class {index} defined twice")));
                }
                self.classes.push((
                    line,
                    TrafficClass {
                        index,
                        max_lsp_bandwidth: max,
                    },
                    ports,
                ));
            }
            (Section::Bc, "model") => {
                self.once(line, "model")?;
                let a = expect_args(line, key, args, 1)?;
                self.model = Some(match a[0] {
                    "mam" => BamModel::Mam,
                    "rdm" => BamModel::Rdm,
                    other => {
                        return Err(err(
                            line,
                            "model",
                            format!("expected `mam` or `rdm`, got `{other}`"),
                        ))
                    }
                });
            }
            (Section::Bc, "bc") => {
                self.once(line, "bc")?;
                if args.is_empty() {
                    return Err(err(line, "bc", "at least one value is required"));
                }
                self.bc = Some(
                    args.iter()
                        .map(|v| bc_value(line, v))
                        .collect::<Result<_, _>>()?,
                );
            }
            (Section::Bc, "links") => {
                self.once(line, "links")?;
                if args.is_empty() {
                    return Err(err(line, "links", "expected `all` or link names"));
                }
                self.links = Some((line, args.iter().map(|s| s.to_string()).collect()));
            }
            (Section::Reconfig, "after_request" | "at_time") => {
                if args.len() < 3 {
                    return Err(err(line, key, "expected a trigger, a mode and BC values"));
                }
                let trigger = if key == "after_request" {
                    Trigger::AfterRequest(num(line, key, args[0])?)
                } else {
                    Trigger::AtTime(secs(line, key, args[0])?)
                };
                let mode = mode(line, args[1])?;
                let values = args[2..]
                    .iter()
                    .map(|v| bc_value(line, v))
                    .collect::<Result<_, _>>()?;
                self.reconfigs.push(RawReconfig {
                    trigger,
                    mode,
                    values,
                });
            }
            (Section::Demand, "demand") => {
                let a = expect_args(line, key, args, 4)?;
                self.demand.push(RawDemand {
                    line,
                    host: a[0].to_string(),
                    class: num(line, "demand", a[1])?,
                    count: num(line, "demand", a[2])?,
                    start_cycle: num(line, "demand", a[3])?,
                });
            }
            (Section::Run, _) => self.run_key(line, key, args)?,
            _ => {
                return Err(err(
                    line,
                    key,
                    format!("unknown key in [{}]", section_name(section)),
                ))
            }
        }
        Ok(())
    }

    fn run_key(&mut self, line: usize, key: &str, args: &[&str]) -> Result<(), ScenarioError> {
        let a = expect_args(line, key, args, 1)?;
        let v = a[0];
        match key {
            "name" => {
                self.once(line, "name")?;
                self.name = Some(v.to_string());
            }
            "destination" => {
                self.once(line, "destination")?;
                self.destination = Some((line, v.to_string()));
            }
            "cycles" => {
                self.once(line, "cycles")?;
                self.cycles = Some(num(line, key, v)?);
            }
            "cycle_length" => {
                self.once(line, "cycle_length")?;
                self.cycle_length = Some(secs(line, key, v)?);
            }
            "lsp_lifetime" => {
                self.once(line, "lsp_lifetime")?;
                self.lsp_lifetime = Some(secs(line, key, v)?);
            }
            "seed" => {
                self.once(line, "seed")?;
                self.seed = Some(num(line, key, v)?);
            }
            "stop" => {
                self.once(line, "stop")?;
                self.stop = Some(num(line, key, v)?);
            }
            "window" => {
                self.once(line, "window")?;
                self.window = Some(num(line, key, v)?);
            }
            "protocol" => {
                self.once(line, "protocol")?;
                self.protocol = Some(num(line, key, v)?);
            }
            _ => return Err(err(line, key, "unknown key in [run]")),
        }
        Ok(())
    }

    fn finish(self, last_line: usize) -> Result<ScenarioSpec, ScenarioError> {
        let topology: Topology = self
            .topology
            .unwrap_or_default()
            .build()
            .map_err(|e| ScenarioError::Validation(e.to_string()))?;
        let (bl, bname) = self
            .bottleneck
            .ok_or_else(|| err(last_line, "bottleneck", "missing"))?;
        let bottleneck = topology
            .link_by_name(&bname)
            .ok_or_else(|| err(bl, "bottleneck", format!("unknown link `{bname}`")))?;
        let (dl, dname) = self
            .destination
            .ok_or_else(|| err(last_line, "destination", "missing"))?;
        let destination = topology
            .node_by_name(&dname)
            .ok_or_else(|| err(dl, "destination", format!("unknown node `{dname}`")))?;

        let mut classes = self.classes;
        classes.sort_by_key(|(_, c, _)| c.index);
        let classifier = classes
            .iter()
            .map(|(_, c, ports)| ClassifierRule {
                src_ip: None,
                dst_ip: None,
                dst_ports: ports.clone(),
                protocol: None,
                class: c.index,
            })
            .collect();
        let classes: Vec<TrafficClass> = classes.into_iter().map(|(_, c, _)| c).collect();

        let model = self
            .model
            .ok_or_else(|| err(last_line, "model", "missing"))?;
        let bc = self.bc.ok_or_else(|| err(last_line, "bc", "missing"))?;
        let applies_to = match self.links {
            None => LinkScope::All,
            Some((_, names)) if names == ["all"] => LinkScope::All,
            Some((line, names)) => {
                let mut set = BTreeSet::new();
                for n in names {
                    let id = topology
                        .link_by_name(&n)
                        .ok_or_else(|| err(line, "links", format!("unknown link `{n}`")))?;
                    set.insert(id);
                }
                LinkScope::Only(set)
            }
        };
        let initial_bc = BcConfig {
            model,
            bc,
            applies_to: applies_to.clone(),
        };
        let reconfigs = self
            .reconfigs
            .into_iter()
            .map(|r| ReconfigSpec {
                trigger: r.trigger,
                mode: r.mode,
                bc: BcConfig {
                    model,
                    bc: r.values,
                    applies_to: applies_to.clone(),
                },
            })
            .collect();

        let mut demand = Vec::new();
        for d in self.demand {
            let host = topology
                .node_by_name(&d.host)
                .ok_or_else(|| err(d.line, "demand", format!("unknown host `{}`", d.host)))?;
            demand.push(DemandEntry {
                host,
                class: d.class,
                count: d.count,
                start_cycle: d.start_cycle,
            });
        }

        let spec = ScenarioSpec {
            name: self.name.unwrap_or_else(|| "unnamed".into()),
            topology,
            bottleneck,
            destination,
            classes,
            classifier,
            initial_bc,
            reconfigs,
            demand,
            cycles: self.cycles.unwrap_or(10),
            cycle_length: self.cycle_length.unwrap_or(SimTime::from_secs(300)),
            lsp_lifetime: self.lsp_lifetime.unwrap_or(SimTime::from_secs(300)),
            seed: self.seed.unwrap_or(1),
            stop: self.stop.ok_or_else(|| err(last_line, "stop", "missing"))?,
            window: self.window.unwrap_or(100),
            protocol: self.protocol.unwrap_or(6),
        };
        spec.validate()?;
        Ok(spec)
    }
}

fn section_name(s: Section) -> &'static str {
    match s {
        Section::Topology => "topology",
        Section::Classes => "classes",
        Section::Bc => "bc",
        Section::Reconfig => "reconfig",
        Section::Demand => "demand",
        Section::Run => "run",
    }
}

/// Parses and validates a scenario.
pub fn parse(text: &str) -> Result<ScenarioSpec, ScenarioError> {
    let mut raw = Raw::default();
    let mut section = None;
    let mut last_line = 0;
    for (i, full) in text.lines().enumerate() {
        let line = i + 1;
        last_line = line;
        let content = full.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(name) = content.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            section = Some(match name.trim() {
                "topology" => Section::Topology,
                "classes" => Section::Classes,
                "bc" => Section::Bc,
                "reconfig" => Section::Reconfig,
                "demand" => Section::Demand,
                "run" => Section::Run,
                other => return Err(err(line, "section", format!("unknown section [{other}]"))),
            });
            continue;
        }
        let Some(sec) = section else {
            return Err(err(line, "section", "directive outside of any section"));
        };
        let mut words = content.split_whitespace();
        let key = words.next().unwrap_or_default();
        let args: Vec<&str> = words.collect();
        raw.directive(sec, line, key, &args)?;
    }
    raw.finish(last_line)
}
