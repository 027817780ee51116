//! Human-readable per-packet traces: the path hop by hop with tags and
//! state transitions at each node.

use std::fmt::Write as _;

use openstate::pipeline::{FlowId, Label, PacketUid};
use openstate::simnet::{MetricsLog, PacketRecord, PacketStatus};
use openstate::SimError;

fn label_or_dash(l: Option<Label>) -> String {
    match l {
        Some(l) => l.to_string(),
        None => "-".into(),
    }
}

/// Renders every packet of a flow, in creation (uid) order.
pub fn emit_trace(log: &MetricsLog, flow: FlowId) -> Result<String, SimError> {
    let packets = log.packets_of_flow(flow);
    if packets.is_empty() {
        return Err(SimError::UnknownFlow(flow.0));
    }
    let mut out = String::new();
    for p in packets {
        out.push_str(&render_packet(log, p.uid));
    }
    Ok(out)
}

/// Renders one tracked packet.
pub fn render_packet(log: &MetricsLog, uid: PacketUid) -> String {
    let p: &PacketRecord = &log.packets[uid.0 as usize];
    let mut out = String::new();
    let _ = writeln!(
        out,
        "packet {} {} flow={} created={}",
        p.uid.0, p.kind, p.flow_id, p.created_at
    );
    for hop in &p.hops {
        if matches!(p.status, PacketStatus::Delivered { at, node } if node == hop.node && at == hop.at)
        {
            continue; // delivery line rendered below
        }
        let in_port = hop
            .in_port
            .map(|x| x.to_string())
            .unwrap_or_else(|| "ctrl".into());
        let outs = if hop.punted {
            "controller".to_string()
        } else if hop.egress.is_empty() {
            "-".to_string()
        } else {
            hop.egress
                .iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        let mut line = format!(
            "  {} sw{} in={} state={} out={} tag={}",
            hop.at,
            hop.node,
            in_port,
            label_or_dash(hop.state),
            outs,
            label_or_dash(hop.tag_out),
        );
        for c in &hop.changes {
            if c.old != c.new {
                let _ = write!(line, " {}:{}->{}", c.cause.short_name(), c.old, c.new);
            }
        }
        let _ = writeln!(out, "{line}");
    }
    match p.status {
        PacketStatus::InFlight => {
            let _ = writeln!(out, "  in-flight at end of run");
        }
        PacketStatus::Delivered { at, node } => {
            let tag = p
                .hops
                .last()
                .filter(|h| h.node == node)
                .and_then(|h| h.tag_out);
            let _ = writeln!(out, "  {} delivered host{} tag={}", at, node, label_or_dash(tag));
        }
        PacketStatus::Dropped { at, node, reason } => {
            let _ = writeln!(out, "  {} dropped at {} reason={}", at, node, reason);
        }
    }
    out
}
