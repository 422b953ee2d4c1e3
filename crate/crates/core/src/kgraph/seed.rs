//! Worked AXI write-burst graph used by the demo and tests.

use super::store::{KgEdge, KgNode, KnowledgeGraph, NodeKind, Rel};

const SRC: &str = "seed:axi-write-burst";

/// Signals, burst rules and one requirement for an AXI write channel, plus a
/// small unrelated encoder module so retrieval has something to skip.
pub fn axi_seed() -> KnowledgeGraph {
    let g = KnowledgeGraph::new();
    let nodes = [
        KgNode::new("mod_axi_slave", NodeKind::DesignModule, "axi_slave").with_body("AXI write channel slave"),
        KgNode::new("sig_awvalid", NodeKind::Signal, "AWVALID").with_body("write address valid"),
        KgNode::new("sig_awready", NodeKind::Signal, "AWREADY").with_body("write address ready"),
        KgNode::new("sig_awlen", NodeKind::Signal, "AWLEN").with_body("burst length minus one").with_attr("width", "8"),
        KgNode::new("sig_wvalid", NodeKind::Signal, "WVALID").with_body("write data valid"),
        KgNode::new("sig_wready", NodeKind::Signal, "WREADY").with_body("write data ready"),
        KgNode::new("sig_wlast", NodeKind::Signal, "WLAST").with_body("final write data beat"),
        KgNode::new("rule_addr_handshake", NodeKind::Rule, "AWVALID && AWREADY starts the burst")
            .with_body("After AWVALID && AWREADY handshake"),
        KgNode::new("rule_beat_handshake", NodeKind::Rule, "WVALID && WREADY advances the beat count")
            .with_body("Count data-beat handshakes"),
        KgNode::new("rule_burst_length", NodeKind::Rule, "burst_length = AWLEN + 1")
            .with_body("Check: WLAST = 1 on (AWLEN + 1)-th beat"),
        KgNode::new("rule_wlast_last", NodeKind::Rule, "WLAST asserted on the last data beat")
            .with_body("Check: WLAST = 0 before that"),
        KgNode::new("rule_awlen_stable", NodeKind::Rule, "AWLEN stable during burst")
            .with_body("Assume: AWLEN stable during burst"),
        KgNode::new("req_wlast", NodeKind::Requirement, "WLAST marks the final beat of every write burst"),
        KgNode::new("mod_encoder", NodeKind::DesignModule, "encoder").with_body("encode done flag"),
        KgNode::new("sig_o_done", NodeKind::Signal, "o_done").with_body("encoder finished"),
    ];
    for n in nodes {
        g.upsert_node(n).expect("seed nodes are consistent");
    }
    let edges = [
        ("sig_awvalid", Rel::BoundTo, "mod_axi_slave"),
        ("sig_awready", Rel::BoundTo, "mod_axi_slave"),
        ("sig_awlen", Rel::BoundTo, "mod_axi_slave"),
        ("sig_wvalid", Rel::BoundTo, "mod_axi_slave"),
        ("sig_wready", Rel::BoundTo, "mod_axi_slave"),
        ("sig_wlast", Rel::BoundTo, "mod_axi_slave"),
        ("rule_addr_handshake", Rel::Constrains, "sig_awvalid"),
        ("rule_addr_handshake", Rel::Constrains, "sig_awready"),
        ("rule_beat_handshake", Rel::Constrains, "sig_wvalid"),
        ("rule_beat_handshake", Rel::Constrains, "sig_wready"),
        ("rule_burst_length", Rel::Constrains, "sig_awlen"),
        ("rule_burst_length", Rel::Constrains, "sig_wlast"),
        ("rule_wlast_last", Rel::Constrains, "sig_wlast"),
        ("rule_awlen_stable", Rel::Constrains, "sig_awlen"),
        ("req_wlast", Rel::Constrains, "sig_wlast"),
        ("sig_o_done", Rel::BoundTo, "mod_encoder"),
    ];
    for (s, r, d) in edges {
        g.upsert_edge(KgEdge::new(s, r, d, SRC)).expect("seed edges are well-typed");
    }
    g
}
