//! Reader for SNDlib-style network listings: the NODES and LINKS sections
//! only. Node names map to ids in listing order (1-based); demands and
//! everything else in the file are ignored.

use std::collections::BTreeMap;

use crate::error::SimError;
use crate::pipeline::NodeId;
use crate::simnet::Topology;
use crate::time::Dur;

pub struct SndlibTopology {
    pub topology: Topology,
    pub node_ids: BTreeMap<String, NodeId>,
}

pub fn parse_sndlib(text: &str, link_delay: Dur) -> Result<SndlibTopology, SimError> {
    #[derive(PartialEq)]
    enum Section {
        None,
        Nodes,
        Links,
        Other,
    }
    let mut section = Section::None;
    let mut topology = Topology::new();
    let mut node_ids = BTreeMap::new();
    let mut next_id = 1u32;

    for raw in text.lines() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with('?') {
            continue;
        }
        if section == Section::None {
            if let Some(head) = line.strip_suffix('(') {
                section = match head.trim() {
                    "NODES" => Section::Nodes,
                    "LINKS" => Section::Links,
                    _ => Section::Other,
                };
                continue;
            }
            continue;
        }
        if line == ")" {
            section = Section::None;
            continue;
        }
        match section {
            Section::Nodes => {
                let name = line
                    .split_whitespace()
                    .next()
                    .ok_or_else(|| SimError::Parse(format!("bad node line: {line}")))?;
                let id = NodeId(next_id);
                next_id += 1;
                topology.add_switch(id);
                node_ids.insert(name.to_string(), id);
            }
            Section::Links => {
                // "<id> ( <a> <b> ) <numbers...>"
                let open = line
                    .find('(')
                    .ok_or_else(|| SimError::Parse(format!("bad link line: {line}")))?;
                let close = line[open..]
                    .find(')')
                    .map(|i| i + open)
                    .ok_or_else(|| SimError::Parse(format!("bad link line: {line}")))?;
                let mut ends = line[open + 1..close].split_whitespace();
                let a = ends
                    .next()
                    .ok_or_else(|| SimError::Parse(format!("bad link line: {line}")))?;
                let b = ends
                    .next()
                    .ok_or_else(|| SimError::Parse(format!("bad link line: {line}")))?;
                let &ia = node_ids
                    .get(a)
                    .ok_or_else(|| SimError::Parse(format!("link references unknown node {a}")))?;
                let &ib = node_ids
                    .get(b)
                    .ok_or_else(|| SimError::Parse(format!("link references unknown node {b}")))?;
                topology
                    .add_link(ia, ib, link_delay)
                    .map_err(|e| SimError::Parse(e.to_string()))?;
            }
            _ => {}
        }
    }
    Ok(SndlibTopology { topology, node_ids })
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"?SNDlib native format; type: network; version: 1.0
# sample listing

NODES (
  Alpha ( 10.50 63.50 )
  Beta ( 5.00 58.50 )
  Gamma ( 6.10 60.20 )
)

LINKS (
  L1_Alpha_Beta ( Alpha Beta ) 0.00 40.00 0.00 40.00 ( 40.00 468.00 )
  L2_Beta_Gamma ( Beta Gamma ) 0.00 40.00 0.00 40.00 ( 40.00 468.00 )
)

DEMANDS (
  D1 ( Alpha Gamma ) 1 100.00 UNLIMITED
)
"#;

    #[test]
    fn parses_nodes_and_links_only() {
        let parsed = parse_sndlib(SAMPLE, Dur(1000)).unwrap();
        assert_eq!(parsed.node_ids.len(), 3);
        assert_eq!(parsed.topology.links().len(), 2);
        let a = parsed.node_ids["Alpha"];
        let b = parsed.node_ids["Beta"];
        assert!(parsed.topology.link_between(a, b).is_some());
        assert_eq!(parsed.topology.link(parsed.topology.link_between(a, b).unwrap()).delay, Dur(1000));
    }

    #[test]
    fn unknown_node_in_link_fails() {
        let bad = "NODES (\n A ( 0 0 )\n)\nLINKS (\n L ( A Z ) 0\n)\n";
        assert!(parse_sndlib(bad, Dur(1)).is_err());
    }
}
